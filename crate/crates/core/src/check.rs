//! The property suite run by `oldb2d check`: every structural invariant of
//! the solver, evaluated on the data a configuration describes.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::ledger::{apriori_ledger_with_constant, bound_check, evaluate, LedgerInputs};
use crate::diagnostics::units::Dim;
use crate::diagnostics::{density_drift, energy_ledger, energy_rate_check, positivity_report, DiagnosticsRecord};
use crate::dynamics::{
    determinant_rhs, momentum_rhs, rho_rhs, state_derivative, stress_rhs, transport, Kinematics,
};
use crate::error::{Error, Result};
use crate::fields::{norms, PhysParams, SimState, StressField};
use crate::integrate::{compute_dt, run, Monitors, StepControl, Trajectory};
use crate::io::initial::{band_limited, band_limited_state, build_initial, equilibrium, small_smooth_state};
use crate::io::snapshot::{decode_snapshot, encode_snapshot};
use crate::io::RunConfig;
use crate::picard::{
    composite, composite_difference, contraction_estimate, free_evolution, op_l1, op_l2, op_q1, op_q2,
    picard_iterate, picard_map, PicardConfig,
};
use crate::spectral::{make_grid, perp_grad, Axis, Grid, ScalarField, VectorField};

#[derive(Clone, Debug)]
pub struct CheckItem {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }

    pub fn item(&self, module: &str, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.module == module && i.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            let tag = if i.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag}  {}::{}  {}", i.module, i.name, i.detail)?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.items.len(), failed)
    }
}

type Outcome = Result<(bool, String)>;

fn at_most(value: f64, limit: f64) -> (bool, String) {
    (value <= limit, format!("{value:.3e} <= {limit:.3e}"))
}

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Relative `L^2` distance, absolute when the reference vanishes.
fn rel_l2(x: &ScalarField, reference: &ScalarField) -> f64 {
    let d = x.sub(reference).l2_norm();
    let r = reference.l2_norm();
    if r == 0.0 {
        d
    } else {
        d / r
    }
}

fn white_noise(grid: &Grid, rng: &mut impl Rng) -> ScalarField {
    let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ScalarField::new(grid.clone(), v).expect("sized to the grid")
}

/// Random trigonometric polynomial and its exact `x`, `y` derivatives and
/// Laplacian.
fn trig_poly(grid: &Grid, modes: i64, rng: &mut impl Rng) -> [ScalarField; 4] {
    let k0 = grid.wavenumber_scale();
    let mut terms = Vec::new();
    for mx in 0..=modes {
        for my in -modes..=modes {
            if mx == 0 && my <= 0 {
                continue;
            }
            let amp: f64 = rng.gen_range(-1.0..1.0);
            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            terms.push((mx as f64 * k0, my as f64 * k0, amp, phase));
        }
    }
    let eval = |kind: u8| {
        ScalarField::from_fn(grid, |x, y| {
            terms
                .iter()
                .map(|&(kx, ky, a, p)| {
                    let ph = kx * x + ky * y + p;
                    match kind {
                        0 => a * ph.sin(),
                        1 => a * kx * ph.cos(),
                        2 => a * ky * ph.cos(),
                        _ => -a * (kx * kx + ky * ky) * ph.sin(),
                    }
                })
                .sum()
        })
    };
    [eval(0), eval(1), eval(2), eval(3)]
}

/// Picard limit against the time stepper at `cfg.t0`.
#[derive(Clone, Debug)]
pub struct Agreement {
    /// Relative `L^2` difference of `u1, u2, a, b, c, rho`.
    pub fields: [(&'static str, f64); 6],
    pub contraction: f64,
    pub iterations: usize,
}

impl Agreement {
    pub fn worst(&self) -> f64 {
        self.fields.iter().map(|f| f.1).fold(0.0, f64::max)
    }
}

impl fmt::Display for Agreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, v) in &self.fields {
            write!(f, "{name}={v:.2e} ")?;
        }
        write!(
            f,
            "contraction={:.3} iterations={}",
            self.contraction, self.iterations
        )
    }
}

/// Iterates the mild formulation to convergence and compares the limit at
/// `cfg.t0` with a fine fixed-step run of the stepper.
pub fn picard_agreement(initial: &SimState, params: &PhysParams, cfg: &PicardConfig) -> Result<Agreement> {
    let (sol, hist) = picard_iterate(&initial.u, &initial.stress, &initial.rho, params, cfg)?;
    let ctl = StepControl::fixed(cfg.t0 / 200.0, initial.time + cfg.t0)?;
    let traj = run(initial, params, &ctl, &Monitors::numerical_only())?;
    let p = sol.final_state();
    let s = &traj.final_state;
    Ok(Agreement {
        fields: [
            ("u1", rel_l2(&p.u.x, &s.u.x)),
            ("u2", rel_l2(&p.u.y, &s.u.y)),
            ("a", rel_l2(&p.stress.a, &s.stress.a)),
            ("b", rel_l2(&p.stress.b, &s.stress.b)),
            ("c", rel_l2(&p.stress.c, &s.stress.c)),
            ("rho", rel_l2(&p.rho, &s.rho)),
        ],
        contraction: contraction_estimate(&hist)?,
        iterations: hist.iterations(),
    })
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    grid: Grid,
    params: PhysParams,
    initial: SimState,
    banded: SimState,
    main: std::result::Result<Trajectory, String>,
    seed: u64,
}

impl Ctx<'_> {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    fn main_run(&self) -> Result<&Trajectory> {
        self.main
            .as_ref()
            .map_err(|e| Error::NumericalFailure {
                time: 0.0,
                reason: format!("main run failed: {e}"),
            })
    }

    /// Grid for the time-sampled mild iteration, at most `32 x 32`.
    fn picard_grid(&self) -> Result<Grid> {
        make_grid(self.grid.n().min(32), self.grid.length())
    }

    fn rho_level(&self) -> f64 {
        if self.cfg.initial.rho0 > 0.0 {
            self.cfg.initial.rho0
        } else {
            1.0
        }
    }
}

/// Runs every property on the data described by `cfg`. Only configuration
/// problems are errors; failing properties are reported as items.
pub fn run_checks(cfg: &RunConfig) -> Result<CheckReport> {
    let grid = cfg.grid()?;
    let initial = build_initial(cfg, &grid)?;
    let params = cfg.params;
    let rho = if cfg.initial.rho0 > 0.0 { cfg.initial.rho0 } else { 1.0 };
    let modes = cfg.initial.modes.min((grid.n() - 2) / 9).max(1);
    let banded = band_limited_state(
        &grid,
        rho,
        cfg.initial.amplitude.max(0.1),
        cfg.initial.stress_amplitude.max(0.1),
        modes,
        cfg.initial.seed,
    )?;
    let main = run(&initial, &params, &cfg.control, &Monitors::numerical_only()).map_err(|e| e.to_string());
    let ctx = Ctx {
        cfg,
        grid,
        params,
        initial,
        banded,
        main,
        seed: cfg.initial.seed,
    };

    let checks: &[(&str, &str, fn(&Ctx) -> Outcome)] = &[
        ("spectral_core", "projector_divergence_free_idempotent", projector),
        ("spectral_core", "derivative_exactness", derivatives),
        ("spectral_core", "semigroup_law", semigroup),
        ("spectral_core", "parseval", parseval),
        ("fields", "gamma_predicate_equivalence", gamma_equivalence),
        ("fields", "trace_dominates_anisotropy", trace_relation),
        ("fields", "norm_parseval_consistency", norm_consistency),
        ("dynamics", "determinant_cancellation", determinant_cancellation),
        ("dynamics", "energy_rate_identity", energy_rate_identity),
        ("dynamics", "momentum_divergence_free", momentum_divergence),
        ("dynamics", "transport_means_vanish", transport_means),
        ("integrate", "uniform_relaxation_exact", uniform_relaxation),
        ("integrate", "temporal_order", temporal_order),
        ("integrate", "discrete_positivity", discrete_positivity),
        ("integrate", "discrete_energy_inequality", discrete_energy),
        ("integrate", "density_conservation", density_conservation),
        ("diagnostics", "equilibrium_balance", equilibrium_balance),
        ("diagnostics", "energy_inequality_gate", energy_gate),
        ("diagnostics", "ledger_units", ledger_units),
        ("diagnostics", "positivity_report_brute_force", positivity_brute_force),
        ("picard", "bilinearity", bilinearity),
        ("picard", "linear_operators", linear_operators),
        ("picard", "zeroth_iterate_semigroup", zeroth_iterate),
        ("picard", "fixed_point_consistency", fixed_point),
        ("picard", "stepper_agreement", stepper_agreement),
        ("cli_io", "determinism", determinism),
        ("cli_io", "snapshot_round_trip", snapshot_round_trip),
    ];
    let items = checks
        .iter()
        .map(|&(module, name, f)| {
            let (passed, detail) = match f(&ctx) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckItem {
                module,
                name,
                passed,
                detail,
            }
        })
        .collect();
    Ok(CheckReport { items })
}

fn projector(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(1);
    let v = VectorField::new(white_noise(&ctx.grid, &mut rng), white_noise(&ctx.grid, &mut rng))?;
    let scale = (v.l2_norm_sq() / ctx.grid.area()).sqrt();
    let p = v.spectrum().leray_project();
    let div = p.divergence().max_abs_coeff();
    let pp = p.leray_project().sub(&p);
    let idem = pp.x.max_abs_coeff().max(pp.y.max_abs_coeff());
    let (ok, d) = at_most(div.max(idem), 1e-13 * scale);
    Ok((ok, format!("max(div, P^2 - P) {d}")))
}

fn derivatives(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(2);
    let [f, fx, fy, lap] = trig_poly(&ctx.grid, ctx.grid.max_resolved_mode(), &mut rng);
    let err = |num: ScalarField, exact: &ScalarField| num.sub(exact).max_abs() / exact.max_abs();
    let worst = err(f.ddx(Axis::X), &fx)
        .max(err(f.ddx(Axis::Y), &fy))
        .max(err(f.laplacian(), &lap));
    Ok(at_most(worst, 1e-13))
}

fn semigroup(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(3);
    let f = white_noise(&ctx.grid, &mut rng).spectrum();
    let (d, c) = (ctx.params.kappa, 2.0 * ctx.params.k);
    let (s, t) = (0.37, 0.61);
    let once = f.heat_semigroup(d, c, s + t)?;
    let twice = f.heat_semigroup(d, c, s)?.heat_semigroup(d, c, t)?;
    Ok(at_most(
        once.sub(&twice).max_abs_coeff(),
        1e-13 * f.max_abs_coeff(),
    ))
}

fn parseval(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(4);
    let f = white_noise(&ctx.grid, &mut rng);
    let real = f.l2_norm();
    let spectral = f.spectrum().l2_norm_sq().sqrt();
    Ok(at_most(rel(real, spectral), 1e-12))
}

fn gamma_equivalence(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(5);
    let a = white_noise(&ctx.grid, &mut rng);
    let b = white_noise(&ctx.grid, &mut rng);
    let c = white_noise(&ctx.grid, &mut rng).map(|v| 2.0 * v + 1.0);
    let s = StressField::new(a, b, c)?;
    let gamma = s.gamma();
    let mismatches = (0..ctx.grid.len())
        .filter(|&i| {
            let (a, b, c) = (s.a.values()[i], s.b.values()[i], s.c.values()[i]);
            let det_form = c >= 0.0 && c * c / 4.0 - a * a - b * b >= 0.0;
            (gamma.values()[i] >= 0.0) != det_form
        })
        .count();
    let nonneg = gamma.values().iter().filter(|g| **g >= 0.0).count();
    Ok((
        mismatches == 0,
        format!("{mismatches} disagreements over {} points ({nonneg} with gamma >= 0)", ctx.grid.len()),
    ))
}

fn trace_relation(ctx: &Ctx) -> Outcome {
    let s = &ctx.initial.stress;
    let trace = s.c.integral();
    let aniso = 2.0 * s.a.zip_map(&s.b, f64::hypot).integral();
    Ok((trace >= aniso, format!("int c = {trace:.6e} >= 2 int |(a, b)| = {aniso:.6e}")))
}

fn norm_consistency(ctx: &Ctx) -> Outcome {
    let st = &ctx.initial;
    let n = norms(st);
    let get = |k: &str| n.get(k).unwrap_or(f64::NAN);
    let worst = [
        rel(get("u_L2"), st.u.l2_norm_sq().sqrt()),
        rel(get("sigma_L2"), st.stress.frobenius_sq().integral().sqrt()),
        rel(get("rho_L2"), st.rho.l2_norm()),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(at_most(worst, 1e-12))
}

fn determinant_cancellation(ctx: &Ctx) -> Outcome {
    let p = PhysParams::new(ctx.params.nu, 0.0, ctx.params.k, ctx.params.big_k)?;
    let st = &ctx.banded;
    let r = stress_rhs(st, &p);
    let s = &st.stress;
    let combo = s
        .c
        .mul(&r.c)
        .scale(0.5)
        .sub(&s.a.mul(&r.a).scale(2.0))
        .sub(&s.b.mul(&r.b).scale(2.0));
    let law = determinant_rhs(st, &p)?;
    Ok(at_most(combo.sub(&law).max_abs(), 1e-10 * law.max_abs().max(1.0)))
}

fn energy_rate_identity(ctx: &Ctx) -> Outcome {
    let (st, p) = (&ctx.initial, &ctx.params);
    let d = state_derivative(st, p);
    let rate = 2.0 * (st.u.x.mul(&d.du.x).integral() + st.u.y.mul(&d.du.y).integral())
        + p.big_k * d.dc.integral();
    let e = energy_ledger(st, p);
    let scale = (e.dissipation + e.source + rate.abs()).max(1.0);
    let excess = rate - (e.source - e.dissipation);
    let ok = excess <= 1e-8 * scale && excess.abs() <= 1e-9 * scale;
    Ok((ok, format!("rate - (source - dissipation) = {excess:.3e}, scale {scale:.3e}")))
}

fn momentum_divergence(ctx: &Ctx) -> Outcome {
    let du = momentum_rhs(&ctx.initial, &ctx.params);
    Ok(at_most(du.divergence().max_abs(), 1e-12 * du.max_magnitude().max(1.0)))
}

fn transport_means(ctx: &Ctx) -> Outcome {
    let spec = ctx.initial.spectra();
    let kin = Kinematics::new(&spec.u);
    let tc = transport(&kin, &spec.stress.c).to_field();
    let dr = rho_rhs(&ctx.initial);
    let worst = (tc.mean().abs() / tc.max_abs().max(1.0)).max(dr.mean().abs() / dr.max_abs().max(1.0));
    Ok(at_most(worst, 1e-12))
}

fn uniform_relaxation(ctx: &Ctx) -> Outcome {
    let g = make_grid(8, ctx.grid.length())?;
    let p = &ctx.params;
    let (c0, r0) = (3.0 * ctx.rho_level() + 1.0, ctx.rho_level());
    let s = StressField::new(ScalarField::zeros(&g), ScalarField::zeros(&g), ScalarField::constant(&g, c0))?;
    let st = SimState::new(0.0, VectorField::zeros(&g), s, ScalarField::constant(&g, r0))?;
    let ctl = StepControl::fixed(1e-3 / p.k, 5.0 / p.k)?;
    let traj = run(&st, p, &ctl, &Monitors::default())?;
    let t = traj.final_state.time;
    let exact = 2.0 * r0 + (c0 - 2.0 * r0) * (-2.0 * p.k * t).exp();
    let c = &traj.final_state.stress.c;
    let worst = c.values().iter().map(|v| rel(*v, exact)).fold(0.0, f64::max);
    Ok(at_most(worst, 1e-8))
}

fn temporal_order(ctx: &Ctx) -> Outcome {
    let st = &ctx.banded;
    let p = &ctx.params;
    let ctl = StepControl::new(0.5, 1e-12, 1.0, 1.0, 1)?;
    let h = compute_dt(st, p, &ctl).min(0.05);
    let horizon = 8.0 * h;
    let evolve = |dt: f64| -> Result<SimState> {
        Ok(run(st, p, &StepControl::fixed(dt, horizon)?, &Monitors::numerical_only())?.final_state)
    };
    let [s1, s2, s4] = [evolve(h)?, evolve(h / 2.0)?, evolve(h / 4.0)?];
    let dist = |x: &SimState, y: &SimState| {
        x.u.x.sub(&y.u.x).l2_norm()
            + x.u.y.sub(&y.u.y).l2_norm()
            + x.stress.a.sub(&y.stress.a).l2_norm()
            + x.stress.c.sub(&y.stress.c).l2_norm()
            + x.rho.sub(&y.rho).l2_norm()
    };
    let (e1, e2) = (dist(&s1, &s2), dist(&s2, &s4));
    let order = (e1 / e2).log2();
    Ok((order >= 1.9, format!("measured order {order:.3} (differences {e1:.3e}, {e2:.3e}, dt {h:.3e})")))
}

fn discrete_positivity(ctx: &Ctx) -> Outcome {
    let traj = ctx.main_run()?;
    let sup_c = traj.max_of(|r| r.c_max);
    let floor = -1e-8 * sup_c.max(1.0);
    let eig = traj.min_of(|r| r.min_eigenvalue);
    let gamma = traj.min_of(|r| r.min_gamma);
    Ok((
        eig >= floor && gamma >= floor,
        format!("min eigenvalue {eig:.3e}, min gamma {gamma:.3e}, floor {floor:.3e}"),
    ))
}

fn discrete_energy(ctx: &Ctx) -> Outcome {
    let (st, p) = (&ctx.initial, &ctx.params);
    let h = compute_dt(st, p, &ctx.cfg.control).min(ctx.cfg.control.dt_max);
    let horizon = (20.0 * h).min(ctx.cfg.control.t_end);
    let go = |dt: f64| run(st, p, &StepControl::fixed(dt, horizon)?, &Monitors::numerical_only());
    let rep = energy_rate_check(&go(h)?, &go(h / 2.0)?, 1e-8);
    Ok((
        rep.passed,
        format!(
            "max excess {:.3e} (dt) / {:.3e} (dt/2), C_disc {:.3e}, extrapolated {:.3e}",
            rep.max_excess_coarse, rep.max_excess_fine, rep.c_disc, rep.extrapolated
        ),
    ))
}

fn density_conservation(ctx: &Ctx) -> Outcome {
    let d = density_drift(ctx.main_run()?);
    let (ok, s) = at_most(d.mass.max(d.square), 1e-8);
    Ok((ok, format!("mass {:.3e}, square {:.3e}; {s}", d.mass, d.square)))
}

fn equilibrium_balance(ctx: &Ctx) -> Outcome {
    let st = equilibrium(&ctx.grid, ctx.rho_level())?;
    let rec = DiagnosticsRecord::from_state(&st, &ctx.params);
    let balance = rel(rec.dissipation, rec.source);
    let ctl = StepControl::fixed(ctx.cfg.control.dt_max, 10.0 * ctx.cfg.control.dt_max)?;
    let traj = run(&st, &ctx.params, &ctl, &Monitors::default())?;
    let drift = traj.records.iter().map(|r| rel(r.energy, rec.energy)).fold(0.0, f64::max);
    Ok((
        balance <= 1e-14 && drift <= 1e-12,
        format!("dissipation vs source {balance:.3e}, energy drift {drift:.3e}"),
    ))
}

fn energy_gate(ctx: &Ctx) -> Outcome {
    let traj = ctx.main_run()?;
    let ledger = apriori_ledger_with_constant(
        &ctx.initial,
        &ctx.params,
        ctx.cfg.control.t_end,
        ctx.cfg.constant_c,
    )?;
    let report = bound_check(traj, &ledger);
    let row = report.row("energy").expect("energy row is always present");
    let ok = row.passed().unwrap_or(false);
    Ok((ok, format!("observed {:.6e} vs R0 {:.6e}", row.observed.unwrap_or(f64::NAN), row.bound)))
}

fn ledger_units(_: &Ctx) -> Outcome {
    let u = evaluate(&LedgerInputs::<Dim>::units());
    let ok = u.r0.is(4, -2)
        && u.r1.is(2, 0)
        && u.r2.is(2, -2)
        && u.b.is_dimensionless()
        && u.r3.is_dimensionless()
        && u.r4.is(0, -2)
        && u.r5.is(1, 0)
        && u.energy_exponent.is_dimensionless()
        && u.vorticity_exponent.is_dimensionless()
        && u.density_exponent.is_dimensionless();
    Ok((
        ok,
        format!(
            "R0 [{}], R1 [{}], R2 [{}], B [{}], R3 [{}], R4 [{}], R5 [{}]",
            u.r0, u.r1, u.r2, u.b, u.r3, u.r4, u.r5
        ),
    ))
}

fn positivity_brute_force(ctx: &Ctx) -> Outcome {
    let st = &ctx.initial;
    let rep = positivity_report(st, ctx.cfg.monitors.positivity_tol);
    let scan = |f: &ScalarField| f.values().iter().copied().fold(f64::INFINITY, f64::min);
    let s = &st.stress;
    let ok = rep.min_c == scan(&s.c)
        && rep.min_gamma == scan(&s.gamma())
        && rep.min_eigenvalue == scan(&s.min_eigenvalue())
        && rep.min_rho == scan(&st.rho);
    Ok((
        ok,
        format!(
            "min c {:.6e}, min gamma {:.6e}, min eigenvalue {:.6e}, min rho {:.6e}",
            rep.min_c, rep.min_gamma, rep.min_eigenvalue, rep.min_rho
        ),
    ))
}

fn random_velocity_series(g: &Grid, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<VectorField>> {
    (0..len)
        .map(|_| {
            let u = perp_grad(&band_limited(g, 3, rng).spectrum()).to_field();
            Ok(u)
        })
        .collect()
}

fn random_stress_series(g: &Grid, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<StressField>> {
    (0..len)
        .map(|_| {
            StressField::new(
                band_limited(g, 3, rng),
                band_limited(g, 3, rng),
                band_limited(g, 3, rng),
            )
        })
        .collect()
}

fn vec_dev(x: &[VectorField], y: &[VectorField]) -> f64 {
    let num = x
        .iter()
        .zip(y)
        .map(|(a, b)| a.x.sub(&b.x).max_abs().max(a.y.sub(&b.y).max_abs()))
        .fold(0.0, f64::max);
    let den = y.iter().map(VectorField::max_magnitude).fold(0.0, f64::max);
    num / den.max(f64::MIN_POSITIVE)
}

fn stress_dev(x: &[StressField], y: &[StressField]) -> f64 {
    let num = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            a.a.sub(&b.a)
                .max_abs()
                .max(a.b.sub(&b.b).max_abs())
                .max(a.c.sub(&b.c).max_abs())
        })
        .fold(0.0, f64::max);
    let den = y
        .iter()
        .map(|s| s.a.max_abs().max(s.b.max_abs()).max(s.c.max_abs()))
        .fold(0.0, f64::max);
    num / den.max(f64::MIN_POSITIVE)
}

fn combine_v(alpha: f64, x: &[VectorField], y: &[VectorField]) -> Result<Vec<VectorField>> {
    x.iter()
        .zip(y)
        .map(|(a, b)| VectorField::new(a.x.scale(alpha).add(&b.x), a.y.scale(alpha).add(&b.y)))
        .collect()
}

fn combine_s(alpha: f64, x: &[StressField], y: &[StressField]) -> Result<Vec<StressField>> {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            StressField::new(
                a.a.scale(alpha).add(&b.a),
                a.b.scale(alpha).add(&b.b),
                a.c.scale(alpha).add(&b.c),
            )
        })
        .collect()
}

fn bilinearity(ctx: &Ctx) -> Outcome {
    let g = make_grid(16, ctx.grid.length())?;
    let p = &ctx.params;
    let cfg = PicardConfig::new(0.2, 5, 10, 1e-8)?;
    let mut rng = ctx.rng(6);
    let u = random_velocity_series(&g, 5, &mut rng)?;
    let v = random_velocity_series(&g, 5, &mut rng)?;
    let w = random_velocity_series(&g, 5, &mut rng)?;
    let s = random_stress_series(&g, 5, &mut rng)?;
    let t = random_stress_series(&g, 5, &mut rng)?;
    let alpha = -1.7;
    let uw = combine_v(alpha, &u, &w)?;
    let q1_left = op_q1(&uw, &v, p, &cfg)?;
    let q1_left_ref = combine_v(alpha, &op_q1(&u, &v, p, &cfg)?, &op_q1(&w, &v, p, &cfg)?)?;
    let q1_right = op_q1(&v, &uw, p, &cfg)?;
    let q1_right_ref = combine_v(alpha, &op_q1(&v, &u, p, &cfg)?, &op_q1(&v, &w, p, &cfg)?)?;
    let q2_left = op_q2(&uw, &s, p, &cfg)?;
    let q2_left_ref = combine_s(alpha, &op_q2(&u, &s, p, &cfg)?, &op_q2(&w, &s, p, &cfg)?)?;
    let st = combine_s(alpha, &s, &t)?;
    let q2_right = op_q2(&v, &st, p, &cfg)?;
    let q2_right_ref = combine_s(alpha, &op_q2(&v, &s, p, &cfg)?, &op_q2(&v, &t, p, &cfg)?)?;
    let worst = vec_dev(&q1_left, &q1_left_ref)
        .max(vec_dev(&q1_right, &q1_right_ref))
        .max(stress_dev(&q2_left, &q2_left_ref))
        .max(stress_dev(&q2_right, &q2_right_ref));
    Ok(at_most(worst, 1e-12))
}

fn linear_operators(ctx: &Ctx) -> Outcome {
    let g = make_grid(16, ctx.grid.length())?;
    let p = &ctx.params;
    let cfg = PicardConfig::new(0.2, 5, 10, 1e-8)?;
    let mut rng = ctx.rng(7);
    let s = random_stress_series(&g, 5, &mut rng)?;
    let t = random_stress_series(&g, 5, &mut rng)?;
    let alpha = 0.6;
    let l1 = op_l1(&combine_s(alpha, &s, &t)?, p, &cfg)?;
    let l1_ref = combine_v(alpha, &op_l1(&s, p, &cfg)?, &op_l1(&t, p, &cfg)?)?;
    let r: Vec<ScalarField> = (0..5).map(|_| band_limited(&g, 3, &mut rng).map(|v| 1.0 + 0.3 * v)).collect();
    let q: Vec<ScalarField> = (0..5).map(|_| band_limited(&g, 3, &mut rng)).collect();
    let rq: Vec<ScalarField> = r.iter().zip(&q).map(|(a, b)| a.scale(alpha).add(b)).collect();
    let l2 = op_l2(&rq, p, &cfg)?;
    let l2_ref = combine_s(alpha, &op_l2(&r, p, &cfg)?, &op_l2(&q, p, &cfg)?)?;
    let iso: Vec<StressField> = r.iter().map(StressField::isotropic).collect();
    let l1_iso = op_l1(&iso, p, &cfg)?
        .iter()
        .map(VectorField::max_magnitude)
        .fold(0.0, f64::max);
    let scale = p.big_k * r.iter().map(|f| f.ddx(Axis::X).max_abs()).fold(0.0, f64::max);
    let lin = vec_dev(&l1, &l1_ref).max(stress_dev(&l2, &l2_ref));
    Ok((
        lin <= 1e-12 && l1_iso <= 1e-14 * scale.max(1.0),
        format!("linearity defect {lin:.3e}, |L1(rho I)| {l1_iso:.3e}"),
    ))
}

fn zeroth_iterate(ctx: &Ctx) -> Outcome {
    let g = ctx.picard_grid()?;
    let st = small_smooth_state(&g, ctx.rho_level(), 0.1, ctx.seed)?;
    let p = &ctx.params;
    let cfg = PicardConfig::new(0.1 / p.k, 6, 10, 1e-8)?;
    let z = free_evolution(&st.u, &st.stress, &st.rho, p, &cfg)?;
    let alpha = 2.0 * p.k;
    let mut worst: f64 = 0.0;
    for (t, s) in z.times.iter().zip(&z.stress) {
        for (got, init) in [(&s.a, &st.stress.a), (&s.b, &st.stress.b), (&s.c, &st.stress.c)] {
            let want = init.spectrum().heat_semigroup(p.kappa, alpha, *t)?;
            let diff = got.spectrum().sub(&want).max_abs_coeff();
            worst = worst.max(diff / init.spectrum().max_abs_coeff().max(f64::MIN_POSITIVE));
        }
    }
    Ok(at_most(worst, 1e-14))
}

fn picard_setup(ctx: &Ctx) -> Result<(SimState, PicardConfig)> {
    let g = ctx.picard_grid()?;
    let st = small_smooth_state(&g, ctx.rho_level(), 0.1, ctx.seed)?;
    let c = ctx.cfg;
    let cfg = PicardConfig::new(0.1 / ctx.params.k, c.picard_nodes, c.picard_max_iter, c.picard_tol)?;
    Ok((st, cfg))
}

fn fixed_point(ctx: &Ctx) -> Outcome {
    let (st, cfg) = picard_setup(ctx)?;
    let p = &ctx.params;
    let (sol, _) = picard_iterate(&st.u, &st.stress, &st.rho, p, &cfg)?;
    let mapped = picard_map(&sol, &st.u, &st.stress, &st.rho, p, &cfg)?;
    let d = composite_difference(&mapped, &sol);
    let n = composite(&sol);
    let r = |d: f64, n: f64| if d == 0.0 { 0.0 } else { d / n };
    let worst = r(d.x, n.x).max(r(d.y, n.y)).max(r(d.z, n.z));
    Ok(at_most(worst, 2.0 * cfg.tol))
}

fn stepper_agreement(ctx: &Ctx) -> Outcome {
    let (st, cfg) = picard_setup(ctx)?;
    let a = picard_agreement(&st, &ctx.params, &cfg)?;
    Ok((a.worst() <= 1e-5 && a.contraction < 0.5, a.to_string()))
}

fn determinism(ctx: &Ctx) -> Outcome {
    let again = build_initial(ctx.cfg, &ctx.grid)?;
    let same_initial = encode_snapshot(&again) == encode_snapshot(&ctx.initial);
    let ctl = StepControl::fixed(ctx.cfg.control.dt_max, 5.0 * ctx.cfg.control.dt_max)?;
    let go = || run(&again, &ctx.params, &ctl, &Monitors::numerical_only());
    let (t1, t2) = (go()?, go()?);
    let rows = |t: &Trajectory| t.records.iter().map(crate::io::timeseries::row).collect::<Vec<_>>();
    let same_series = rows(&t1) == rows(&t2);
    let same_final = encode_snapshot(&t1.final_state) == encode_snapshot(&t2.final_state);
    Ok((
        same_initial && same_series && same_final,
        format!("initial {same_initial}, time series {same_series}, final snapshot {same_final}"),
    ))
}

fn snapshot_round_trip(ctx: &Ctx) -> Outcome {
    let snap = decode_snapshot(&encode_snapshot(&ctx.initial)).map_err(Error::ConfigValue)?;
    let st = &ctx.initial;
    let originals = [&st.u.x, &st.u.y, &st.stress.a, &st.stress.b, &st.stress.c, &st.rho];
    let exact = snap.fields.len() == 6
        && snap.time.to_bits() == st.time.to_bits()
        && snap.fields.iter().zip(originals).all(|((_, v), f)| {
            v.iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits())
        });
    Ok((exact, format!("{} fields, bitwise equal: {exact}", snap.fields.len())))
}
