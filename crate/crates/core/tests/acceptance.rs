//! Acceptance suite: one PASS/FAIL line per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use oldb2d::check::picard_agreement;
use oldb2d::diagnostics::ledger::{apriori_ledger, apriori_ledger_with_constant, bound_check, evaluate, LedgerInputs};
use oldb2d::diagnostics::units::Dim;
use oldb2d::diagnostics::{density_drift, determinant_residual, energy_rate_check};
use oldb2d::dynamics::{determinant_rhs, stress_rhs};
use oldb2d::io::initial::{band_limited_state, random_admissible, small_smooth_state, taylor_green};
use oldb2d::picard::{contraction_estimate, picard_iterate, PicardConfig};
use oldb2d::spectral::{Axis, Spectrum};
use oldb2d::{make_grid, run, Grid, Monitors, PhysParams, ScalarField, SimState, StepControl, StressField, Trajectory, VectorField};

const TAU: f64 = std::f64::consts::TAU;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn criterion(id: u32, title: &str, limit_secs: Option<f64>, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f));
    let secs = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => (v.passed, v.detail),
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    if let Some(limit) = limit_secs {
        if secs > limit {
            passed = false;
            detail.push_str(&format!("; runtime {secs:.1} s exceeds {limit} s"));
        }
    }
    let tag = if passed { "PASS" } else { "FAIL" };
    println!("criterion {id:>2} [{tag}] {title}: {detail} ({secs:.1} s)");
    passed
}

fn grid(n: usize) -> Grid {
    make_grid(n, TAU).unwrap()
}

fn default_params() -> PhysParams {
    PhysParams::new(0.01, 0.01, 1.0, 1.0).unwrap()
}

/// Each relaxation run (one value of k) must finish within the limit.
const RELAXATION_RUN_LIMIT: f64 = 10.0;

fn uniform_relaxation() -> Verdict {
    let g = grid(32);
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for (k, c0, rho0) in [(1.0, 5.0, 0.7), (2.5, 0.4, 1.3)] {
        let p = PhysParams::new(0.01, 0.01, k, 1.0).unwrap();
        let s = StressField::new(ScalarField::zeros(&g), ScalarField::zeros(&g), ScalarField::constant(&g, c0)).unwrap();
        let st = SimState::new(0.0, VectorField::zeros(&g), s, ScalarField::constant(&g, rho0)).unwrap();
        let ctl = StepControl::fixed(1e-3 / k, 5.0 / k).unwrap();
        let start = Instant::now();
        let traj = run(&st, &p, &ctl, &Monitors::default()).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let t = traj.final_state.time;
        let exact = 2.0 * rho0 + (c0 - 2.0 * rho0) * (-2.0 * k * t).exp();
        for v in traj.final_state.stress.c.values() {
            worst = worst.max(((v - exact) / exact).abs());
        }
    }
    verdict(
        worst <= 1e-8 && slowest < RELAXATION_RUN_LIMIT,
        format!(
            "max relative error of c(T) {worst:.3e} (limit 1e-8); slowest run {slowest:.1} s (limit {RELAXATION_RUN_LIMIT} s)"
        ),
    )
}

fn taylor_green_decay() -> Verdict {
    let g = grid(64);
    let p = default_params();
    let st = taylor_green(&g, 1.0).unwrap();
    let ctl = StepControl::new(0.5, 1e-6, 0.01, 1.0, 10).unwrap();
    let traj = run(&st, &p, &ctl, &Monitors::default()).unwrap();
    let e0 = traj.records[0].energy;
    let e1 = traj.records.last().unwrap().energy;
    let exact = e0 * (-4.0 * p.nu).exp();
    let err = ((e1 - exact) / exact).abs();
    verdict(err <= 1e-6, format!("E(1) relative error {err:.3e} (limit 1e-6)"))
}

struct SeedRun {
    seed: u64,
    traj: Trajectory,
    fine: Trajectory,
    initial: SimState,
}

static BATCH: OnceLock<Result<Vec<SeedRun>, String>> = OnceLock::new();

/// Twenty seeded random admissible runs, n = 64, T = 2/k, with the default
/// monitors; each also gets a half-step companion run for the energy rate.
fn batch() -> &'static Result<Vec<SeedRun>, String> {
    BATCH.get_or_init(|| {
        let g = grid(64);
        let p = default_params();
        let horizon = 2.0 / p.k;
        (1..=20u64)
            .into_par_iter()
            .map(|seed| {
                let initial = random_admissible(&g, 1.0, 0.5, 0.3, 4, seed).map_err(|e| e.to_string())?;
                let ctl = StepControl::new(0.5, 1e-6, 0.01, horizon, 10).unwrap();
                let traj = run(&initial, &p, &ctl, &Monitors::default()).map_err(|e| format!("seed {seed}: {e}"))?;
                let fine = run(&initial, &p, &StepControl::fixed(0.005, horizon).unwrap(), &Monitors::numerical_only())
                    .map_err(|e| format!("seed {seed} (dt/2): {e}"))?;
                Ok(SeedRun {
                    seed,
                    traj,
                    fine,
                    initial,
                })
            })
            .collect()
    })
}

fn with_batch(f: impl FnOnce(&[SeedRun]) -> Verdict) -> Verdict {
    match batch() {
        Ok(runs) => f(runs),
        Err(e) => verdict(false, format!("batch run failed: {e}")),
    }
}

fn positivity() -> Verdict {
    with_batch(|runs| {
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for r in runs {
            let floor = -1e-8 * r.traj.max_of(|x| x.c_max).max(1.0);
            let m = r.traj.min_of(|x| x.min_eigenvalue);
            ok &= m >= floor;
            worst = worst.min(m);
        }
        verdict(ok, format!("{} runs, min eigenvalue over all runs and times {worst:.6e}", runs.len()))
    })
}

fn gamma_principle() -> Verdict {
    with_batch(|runs| {
        let mut worst = f64::INFINITY;
        let mut ok = true;
        for r in runs {
            let floor = -1e-8 * r.traj.max_of(|x| x.c_max).max(1.0);
            let m = r.traj.min_of(|x| x.min_gamma);
            ok &= m >= floor;
            worst = worst.min(m);
        }
        verdict(ok, format!("{} runs, min gamma over all runs and times {worst:.6e}", runs.len()))
    })
}

fn energy_inequality() -> Verdict {
    with_batch(|runs| {
        let p = default_params();
        let mut ok = true;
        let mut worst_ratio: f64 = 0.0;
        let mut worst_extrap = f64::NEG_INFINITY;
        let mut notes = Vec::new();
        for r in runs {
            let ledger = apriori_ledger(&r.initial, &p, 2.0 / p.k).unwrap();
            let rep = bound_check(&r.traj, &ledger);
            let row = rep.row("energy").unwrap();
            let gate = row.passed() == Some(true);
            worst_ratio = worst_ratio.max(row.ratio().unwrap_or(f64::INFINITY));
            let rate = energy_rate_check(&r.traj, &r.fine, 1e-8);
            worst_extrap = worst_extrap.max(rate.extrapolated / rate.scale);
            if !(gate && rate.passed) {
                ok = false;
                notes.push(format!("seed {}: gate {gate}, rate {}", r.seed, rate.passed));
            }
        }
        verdict(
            ok,
            format!(
                "max observed/R0 {worst_ratio:.4}, max extrapolated rate excess / scale {worst_extrap:.3e}{}",
                if notes.is_empty() { String::new() } else { format!("; {}", notes.join(", ")) }
            ),
        )
    })
}

fn determinant_law() -> Verdict {
    let g = grid(32);
    let p = PhysParams::new(0.01, 0.0, 1.0, 1.0).unwrap();
    let tstar = 0.4;
    let hs = [0.2, 0.1, 0.05];
    let mut min_order = f64::INFINITY;
    for seed in 1..=3 {
        let st = band_limited_state(&g, 1.0, 0.3, 0.2, 3, seed).unwrap();
        let mut ctl = StepControl::fixed(0.05 / 16.0, tstar + hs[0]).unwrap();
        ctl.snapshot_times = hs.iter().flat_map(|h| [tstar - h, tstar + h]).chain([tstar]).collect();
        let traj = run(&st, &p, &ctl, &Monitors::numerical_only()).unwrap();
        let at = |t: f64| traj.snapshots.iter().find(|s| (s.time - t).abs() < 1e-9).unwrap().clone();
        let res: Vec<f64> = hs
            .iter()
            .map(|h| determinant_residual(&[at(tstar - h), at(tstar), at(tstar + h)], &p).unwrap())
            .collect();
        for w in res.windows(2) {
            min_order = min_order.min((w[0] / w[1]).log2());
        }
    }
    let kp = PhysParams::new(0.01, 0.0, 1.3, 1.0).unwrap();
    let mut cancel: f64 = 0.0;
    for seed in 0..10 {
        let st = band_limited_state(&g, 1.0, 0.5, 0.3, 3, 100 + seed).unwrap();
        let r = stress_rhs(&st, &kp);
        let s = &st.stress;
        let combo = s.c.mul(&r.c).scale(0.5).sub(&s.a.mul(&r.a).scale(2.0)).sub(&s.b.mul(&r.b).scale(2.0));
        let law = determinant_rhs(&st, &kp).unwrap();
        cancel = cancel.max(combo.sub(&law).max_abs());
    }
    verdict(
        min_order >= 1.9 && cancel <= 1e-10,
        format!("min residual order {min_order:.3} (limit 1.9), max cancellation defect {cancel:.3e} (limit 1e-10)"),
    )
}

fn picard_vs_stepper() -> Verdict {
    let g = grid(32);
    let p = default_params();
    let t0 = 0.1 / p.k;
    let mut ok = true;
    let (mut worst, mut worst_w22, mut worst_ratio): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let (mut sum_full, mut sum_half) = (0.0, 0.0);
    for seed in 1..=5 {
        let st = small_smooth_state(&g, 1.0, 0.1, seed).unwrap();
        let w22 = st.u.spectrum().sobolev_norm_sq(2).sqrt();
        worst_w22 = worst_w22.max(w22);
        let full = PicardConfig::new(t0, 41, 60, 1e-10).unwrap();
        let a = picard_agreement(&st, &p, &full).unwrap();
        worst = worst.max(a.worst());
        worst_ratio = worst_ratio.max(a.contraction);
        ok &= a.worst() <= 1e-5 && a.contraction < 0.5 && w22 <= 0.1 + 1e-12;
        let half = PicardConfig::new(t0 / 2.0, 41, 60, 1e-10).unwrap();
        let (_, hist) = picard_iterate(&st.u, &st.stress, &st.rho, &p, &half).unwrap();
        sum_full += a.contraction;
        sum_half += contraction_estimate(&hist).unwrap();
    }
    let (mean_full, mean_half) = (sum_full / 5.0, sum_half / 5.0);
    ok &= mean_half <= mean_full;
    verdict(
        ok,
        format!(
            "max |u0|_W22 {worst_w22:.3}, max relative L2 difference {worst:.3e} (limit 1e-5), \
             max contraction {worst_ratio:.3}, mean contraction t0 {mean_full:.4} vs t0/2 {mean_half:.4}"
        ),
    )
}

fn density_invariants() -> Verdict {
    with_batch(|runs| {
        let (mut mass, mut square): (f64, f64) = (0.0, 0.0);
        for r in runs {
            let d = density_drift(&r.traj);
            mass = mass.max(d.mass);
            square = square.max(d.square);
        }
        verdict(
            mass <= 1e-8 && square <= 1e-8,
            format!("max drift per unit time: int rho {mass:.3e}, int rho^2 {square:.3e} (limit 1e-8)"),
        )
    })
}

fn white_noise(g: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
    ScalarField::new(g.clone(), (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// `sum a sin(k.x + phase)` over every resolved mode, with exact gradient
/// and Laplacian.
fn trig_poly(g: &Grid, rng: &mut ChaCha8Rng) -> [ScalarField; 4] {
    let m = g.max_resolved_mode();
    let k0 = TAU / g.length();
    let mut terms = Vec::new();
    for mx in 0..=m {
        for my in -m..=m {
            if mx > 0 || my > 0 {
                terms.push((mx as f64 * k0, my as f64 * k0, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..TAU)));
            }
        }
    }
    let eval = |which: usize| {
        ScalarField::from_fn(g, |x, y| {
            terms
                .iter()
                .map(|&(kx, ky, a, ph): &(f64, f64, f64, f64)| {
                    let arg = kx * x + ky * y + ph;
                    match which {
                        0 => a * arg.sin(),
                        1 => a * kx * arg.cos(),
                        2 => a * ky * arg.cos(),
                        _ => -a * (kx * kx + ky * ky) * arg.sin(),
                    }
                })
                .sum()
        })
    };
    [eval(0), eval(1), eval(2), eval(3)]
}

fn spectral_exactness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut proj, mut semi, mut deriv): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for n in [16, 32, 64] {
        for length in [TAU, 1.0, 3.7] {
            let g = make_grid(n, length).unwrap();
            for _ in 0..3 {
                let v = VectorField::new(white_noise(&g, &mut rng), white_noise(&g, &mut rng)).unwrap();
                let rms = (v.l2_norm_sq() / g.area()).sqrt();
                let pv = v.spectrum().leray_project();
                let twice = pv.leray_project().sub(&pv);
                let defect = pv
                    .divergence()
                    .max_abs_coeff()
                    .max(twice.x.max_abs_coeff())
                    .max(twice.y.max_abs_coeff());
                proj = proj.max(defect / rms);

                let f: Spectrum = white_noise(&g, &mut rng).spectrum();
                let (d, c, s, t) = (0.013 * length * length, 0.7, 0.29, 0.55);
                let once = f.heat_semigroup(d, c, s + t).unwrap();
                let comp = f.heat_semigroup(d, c, s).unwrap().heat_semigroup(d, c, t).unwrap();
                semi = semi.max(once.sub(&comp).max_abs_coeff() / f.max_abs_coeff());

                let [h, hx, hy, lap] = trig_poly(&g, &mut rng);
                let rel = |num: ScalarField, exact: &ScalarField| num.sub(exact).max_abs() / exact.max_abs();
                deriv = deriv
                    .max(rel(h.ddx(Axis::X), &hx))
                    .max(rel(h.ddx(Axis::Y), &hy))
                    .max(rel(h.laplacian(), &lap));
            }
        }
    }
    verdict(
        proj <= 1e-13 && semi <= 1e-13 && deriv <= 1e-13,
        format!("projector {proj:.3e}, semigroup {semi:.3e}, derivatives {deriv:.3e} (limit 1e-13 each)"),
    )
}

fn config_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn ledger_sanity() -> Verdict {
    let u = evaluate(&LedgerInputs::<Dim>::units());
    let units_ok = u.r0.is(4, -2)
        && u.r1.is(2, 0)
        && u.r2.is(2, -2)
        && u.r3.is_dimensionless()
        && u.r4.is(0, -2)
        && u.energy_exponent.is_dimensionless()
        && u.vorticity_exponent.is_dimensionless()
        && u.density_exponent.is_dimensionless();
    let b_ok = u.b.is_dimensionless();

    let g = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut monotone = true;
    let mut finite_draws = 0;
    for _ in 0..200 {
        let p = PhysParams::new(
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.05..2.0),
            rng.gen_range(0.05..2.0),
        )
        .unwrap();
        let st = random_admissible(
            &g,
            rng.gen_range(0.01..0.2),
            rng.gen_range(0.0..0.2),
            rng.gen_range(0.0..0.05),
            3,
            rng.gen(),
        )
        .unwrap();
        let t = rng.gen_range(0.01..2.0);
        let constant = rng.gen_range(0.5..2.0);
        let l1 = apriori_ledger_with_constant(&st, &p, t, constant).unwrap();
        let l2 = apriori_ledger_with_constant(&st, &p, 2.0 * t, constant).unwrap();
        if !l2.has_overflow() {
            finite_draws += 1;
        }
        for ((_, a), (_, b)) in l1.entries().iter().zip(l2.entries()) {
            monotone &= b >= *a;
        }
    }

    let bin = env!("CARGO_BIN_EXE_oldb2d");
    let cfg = config_path("default.cfg");
    let status = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .arg("--config")
            .arg(&cfg)
            .output()
            .map(|o| o.status.code())
            .ok()
            .flatten()
    };
    let bounds = status(&["bounds"]);
    let check = status(&["check"]);
    verdict(
        units_ok && b_ok && monotone && bounds == Some(0) && check == Some(0),
        format!(
            "units {units_ok}, B dimensionless {b_ok}, monotone in T over 200 draws {monotone} \
             ({finite_draws} fully finite), `bounds` exit {bounds:?}, `check` exit {check:?}"
        ),
    )
}

fn main() -> ExitCode {
    let results = [
        criterion(1, "uniform relaxation exact solution", None, uniform_relaxation),
        criterion(2, "Taylor-Green energy decay", Some(30.0), taylor_green_decay),
        criterion(3, "discrete positivity", Some(300.0), positivity),
        criterion(4, "gamma maximum principle", None, gamma_principle),
        criterion(5, "energy inequality", None, energy_inequality),
        criterion(6, "determinant law at kappa = 0", None, determinant_law),
        criterion(7, "Picard limit vs time stepper", None, picard_vs_stepper),
        criterion(8, "density transport invariants", None, density_invariants),
        criterion(9, "spectral exactness", None, spectral_exactness),
        criterion(10, "bound ledger sanity", None, ledger_sanity),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
