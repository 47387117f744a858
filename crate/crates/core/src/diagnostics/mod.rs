//! Per-step diagnostics, positivity and energy monitors, the determinant
//! law check, and conservation of the transported density.

pub mod ledger;
pub mod units;

pub use ledger::{
    apriori_ledger, apriori_ledger_with_constant, bound_check, bound_check_series, BoundLedger,
    BoundReport, BoundRow, BoundSeries,
};

use crate::dynamics::{determinant_law, pressure_residual};
use crate::error::{Error, Result};
use crate::fields::{norms_with_spectra, NormReport, PhysParams, SimState, SpectralState};
use crate::integrate::Trajectory;

/// Everything recorded about one state.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub time: f64,
    /// `int (|u|^2 + K c)`
    pub energy: f64,
    /// `int (2 nu |grad u|^2 + 2 k K c)`
    pub dissipation: f64,
    /// `4 k K int rho`
    pub source: f64,
    pub min_gamma: f64,
    pub min_eigenvalue: f64,
    pub min_rho: f64,
    pub rho_max: f64,
    pub c_max: f64,
    pub rho_integral: f64,
    pub rho_sq_integral: f64,
    pub norms: NormReport,
    /// Residual of the determinant law, filled in for `kappa = 0` runs.
    pub determinant_residual: Option<f64>,
    /// `|F - grad p - P F|` for the momentum forcing `F`.
    pub momentum_residual: f64,
}

impl DiagnosticsRecord {
    pub fn from_state(state: &SimState, params: &PhysParams) -> Self {
        Self::with_spectra(state, &state.spectra(), params)
    }

    pub(crate) fn with_spectra(state: &SimState, spec: &SpectralState, params: &PhysParams) -> Self {
        let e = energy_ledger_spectral(state, spec, params);
        let gamma = state.stress.gamma();
        DiagnosticsRecord {
            time: state.time,
            energy: e.energy,
            dissipation: e.dissipation,
            source: e.source,
            min_gamma: gamma.min(),
            min_eigenvalue: state.stress.min_eigenvalue().min(),
            min_rho: state.rho.min(),
            rho_max: state.rho.max(),
            c_max: state.stress.c.max(),
            rho_integral: state.rho.integral(),
            rho_sq_integral: spec.rho.l2_norm_sq(),
            norms: norms_with_spectra(state, spec),
            determinant_residual: None,
            momentum_residual: pressure_residual(spec, params),
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.energy,
            self.dissipation,
            self.source,
            self.min_gamma,
            self.min_eigenvalue,
            self.min_rho,
            self.c_max,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// The three integrals of the energy balance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyLedger {
    pub energy: f64,
    pub dissipation: f64,
    pub source: f64,
}

pub fn energy_ledger(state: &SimState, params: &PhysParams) -> EnergyLedger {
    energy_ledger_spectral(state, &state.spectra(), params)
}

fn energy_ledger_spectral(state: &SimState, spec: &SpectralState, p: &PhysParams) -> EnergyLedger {
    let c_int = state.stress.c.integral();
    EnergyLedger {
        energy: spec.u.l2_norm_sq() + p.big_k * c_int,
        dissipation: 2.0 * p.nu * spec.u.grad_norm_sq() + 2.0 * p.k * p.big_k * c_int,
        source: 4.0 * p.k * p.big_k * state.rho.integral(),
    }
}

/// Grid minima of the positivity-related quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PositivityReport {
    pub min_c: f64,
    pub min_gamma: f64,
    pub min_eigenvalue: f64,
    pub min_rho: f64,
    /// `tol * max(1, max c)`
    pub threshold: f64,
    pub passed: bool,
}

pub fn positivity_report(state: &SimState, tol: f64) -> PositivityReport {
    let s = &state.stress;
    let min_eigenvalue = s.min_eigenvalue().min();
    let min_gamma = s.gamma().min();
    let min_rho = state.rho.min();
    let threshold = tol * s.c.max().max(1.0);
    let rho_threshold = tol * state.rho.max().max(1.0);
    PositivityReport {
        min_c: s.c.min(),
        min_gamma,
        min_eigenvalue,
        min_rho,
        threshold,
        passed: min_eigenvalue >= -threshold
            && min_gamma >= -threshold
            && min_rho >= -rho_threshold,
    }
}

/// Second-order derivative at the middle of three unevenly spaced samples.
fn centered_rate(t: [f64; 3], f: [&[f64]; 3]) -> Vec<f64> {
    let h1 = t[1] - t[0];
    let h2 = t[2] - t[1];
    let denom = h1 * h2 * (h1 + h2);
    (0..f[0].len())
        .map(|i| (h1 * h1 * f[2][i] - h2 * h2 * f[0][i] + (h2 * h2 - h1 * h1) * f[1][i]) / denom)
        .collect()
}

fn window_times(window: &[SimState]) -> Result<[f64; 3]> {
    if window.len() != 3 {
        return Err(Error::InvalidWindow);
    }
    let t = [window[0].time, window[1].time, window[2].time];
    if !(t[0] < t[1] && t[1] < t[2]) {
        return Err(Error::InvalidWindow);
    }
    Ok(t)
}

/// Pieces of the determinant residual for runs with stress diffusion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeterminantResidual {
    /// `|d_t d - law|`
    pub total: f64,
    /// `|kappa ((c/2) lap c - 2a lap a - 2b lap b)|`, the diffusive share.
    pub diffusive: f64,
    /// `|d_t d - law - diffusive part|`
    pub remainder: f64,
}

/// `L^2` norm of `d_t d + u.grad d + 4k d - 2k rho c` at the middle state of
/// a three-state window, where `d = c^2/4 - a^2 - b^2`. Requires `kappa = 0`.
pub fn determinant_residual(window: &[SimState], params: &PhysParams) -> Result<f64> {
    if params.kappa != 0.0 {
        return Err(Error::KappaNonZero(params.kappa));
    }
    Ok(determinant_residual_parts(window, params)?.total)
}

/// Like [`determinant_residual`] but accepts `kappa > 0`, reporting the
/// contribution of stress diffusion separately.
pub fn determinant_residual_parts(
    window: &[SimState],
    params: &PhysParams,
) -> Result<DeterminantResidual> {
    let t = window_times(window)?;
    let d: Vec<_> = window.iter().map(|s| s.stress.determinant()).collect();
    let rate = centered_rate(t, [d[0].values(), d[1].values(), d[2].values()]);
    let mid = &window[1];
    let law = determinant_law(mid, params);
    let grid = mid.grid();
    let residual = crate::spectral::ScalarField::new(
        grid.clone(),
        rate.iter().zip(law.values()).map(|(r, l)| r - l).collect(),
    )?;
    let s = &mid.stress;
    let kappa = params.kappa;
    let diffusive = s
        .c
        .mul(&s.c.laplacian())
        .scale(0.5)
        .sub(&s.a.mul(&s.a.laplacian()).scale(2.0))
        .sub(&s.b.mul(&s.b.laplacian()).scale(2.0))
        .scale(kappa);
    Ok(DeterminantResidual {
        total: residual.l2_norm(),
        diffusive: diffusive.l2_norm(),
        remainder: residual.sub(&diffusive).l2_norm(),
    })
}

/// Per-step excess of the discrete energy balance,
/// `(E_{n+1} - E_n)/dt + D_n - S_n`, which is `O(dt)` for a consistent scheme.
pub fn energy_rate_excess(records: &[DiagnosticsRecord]) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| (w[1].energy - w[0].energy) / (w[1].time - w[0].time) + w[0].dissipation - w[0].source)
        .collect()
}

/// Richardson estimate of the constant in `excess <= C dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRateReport {
    pub dt: f64,
    /// Largest per-step excess at `dt` and at `dt/2`.
    pub max_excess_coarse: f64,
    pub max_excess_fine: f64,
    /// Estimated `C` in `excess ~ C dt`.
    pub c_disc: f64,
    /// `2 e(dt/2) - e(dt)`, the zero-step-size extrapolation of the excess.
    pub extrapolated: f64,
    /// Magnitude of the balance terms, for relative comparisons.
    pub scale: f64,
    pub passed: bool,
}

/// Compares two fixed-step runs of the same problem at `dt` and `dt/2`.
/// Passes when the extrapolated excess is small against the fine-run
/// excess (so the excess is genuinely `O(dt)`) and every step of both runs
/// satisfies `excess <= 2 |C| dt + tol * scale`.
pub fn energy_rate_check(coarse: &Trajectory, fine: &Trajectory, tol: f64) -> EnergyRateReport {
    let dt = coarse.records.get(1).map_or(0.0, |r| r.time - coarse.records[0].time);
    let ec = energy_rate_excess(&coarse.records);
    let ef = energy_rate_excess(&fine.records);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mc, mf) = (max(&ec), max(&ef));
    let c_disc = if dt > 0.0 { (mc - mf) / (0.5 * dt) } else { 0.0 };
    let scale = coarse
        .records
        .iter()
        .map(|r| r.dissipation.abs() + r.source.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let extrapolated = 2.0 * mf - mc;
    let slack = tol * scale;
    let ok_run = |e: &[f64], traj: &Trajectory| {
        e.iter().zip(traj.records.windows(2)).all(|(x, w)| {
            *x <= 2.0 * c_disc.abs() * (w[1].time - w[0].time) + slack
        })
    };
    EnergyRateReport {
        dt,
        max_excess_coarse: mc,
        max_excess_fine: mf,
        c_disc,
        extrapolated,
        scale,
        passed: extrapolated <= 0.5 * mf.abs() + slack && ok_run(&ec, coarse) && ok_run(&ef, fine),
    }
}

/// Relative drift per unit time of `int rho` and `int rho^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityDrift {
    pub mass: f64,
    pub square: f64,
}

pub fn density_drift(traj: &Trajectory) -> DensityDrift {
    let r = &traj.records;
    let (first, last) = (&r[0], r.last().unwrap());
    let span = (last.time - first.time).max(f64::MIN_POSITIVE);
    let drift = |f: &dyn Fn(&DiagnosticsRecord) -> f64| {
        let base = f(first);
        let worst = r.iter().map(|x| (f(x) - base).abs()).fold(0.0, f64::max);
        if base == 0.0 {
            worst / span
        } else {
            worst / base.abs() / span
        }
    };
    DensityDrift {
        mass: drift(&|x| x.rho_integral),
        square: drift(&|x| x.rho_sq_integral),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::StressField;
    use crate::integrate::{run, Monitors, StepControl};
    use crate::spectral::{make_grid, Grid, ScalarField, VectorField};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        make_grid(n, 2.0 * PI).unwrap()
    }

    fn params() -> PhysParams {
        PhysParams::new(0.01, 0.01, 1.0, 1.0).unwrap()
    }

    fn equilibrium(g: &Grid, rho0: f64) -> SimState {
        let rho = ScalarField::constant(g, rho0);
        SimState::new(0.0, VectorField::zeros(g), StressField::isotropic(&rho), rho).unwrap()
    }

    fn taylor_green(g: &Grid) -> SimState {
        let u = VectorField::new(
            ScalarField::from_fn(g, |x, y| x.sin() * y.cos()),
            ScalarField::from_fn(g, |x, y| -x.cos() * y.sin()),
        )
        .unwrap();
        SimState::new(0.0, u, StressField::zeros(g), ScalarField::zeros(g)).unwrap()
    }

    #[test]
    fn energy_ledger_examples() {
        let g = grid(16);
        let p = PhysParams::new(0.01, 0.01, 1.5, 2.0).unwrap();
        let area = 4.0 * PI * PI;
        let rho0 = 0.7;
        let e = energy_ledger(&equilibrium(&g, rho0), &p);
        assert!((e.energy - p.big_k * 2.0 * rho0 * area).abs() < 1e-12);
        assert!((e.dissipation - e.source).abs() < 1e-12);
        assert!((e.source - 4.0 * p.k * p.big_k * rho0 * area).abs() < 1e-12);

        let z = energy_ledger(&equilibrium(&g, 0.0), &p);
        assert_eq!((z.energy, z.dissipation, z.source), (0.0, 0.0, 0.0));

        let p = params();
        let e = energy_ledger(&taylor_green(&g), &p);
        assert!((e.energy - 2.0 * PI * PI).abs() < 1e-12);
        assert!((e.dissipation - 2.0 * p.nu * 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn positivity_examples() {
        let g = grid(8);
        let r = positivity_report(&equilibrium(&g, 1.0), 1e-8);
        assert_eq!((r.min_c, r.min_gamma), (2.0, 2.0));
        assert!(r.passed);

        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        let mut c = vec![1.0; 64];
        a[10] = 3.0;
        b[10] = 4.0;
        c[10] = 9.9;
        let s = StressField::new(
            ScalarField::new(g.clone(), a).unwrap(),
            ScalarField::new(g.clone(), b).unwrap(),
            ScalarField::new(g.clone(), c).unwrap(),
        )
        .unwrap();
        let st = SimState::new(0.0, VectorField::zeros(&g), s, ScalarField::constant(&g, 1.0))
            .unwrap();
        let r = positivity_report(&st, 1e-8);
        assert!((r.min_gamma + 0.1).abs() < 1e-12);
        assert!(!r.passed);
    }

    #[test]
    fn equilibrium_run_is_constant() {
        let g = grid(16);
        let p = params();
        let ctl = StepControl::fixed(0.05, 1.0).unwrap();
        let traj = run(&equilibrium(&g, 1.0), &p, &ctl, &Monitors::default()).unwrap();
        let e0 = traj.records[0].energy;
        for r in &traj.records {
            assert!((r.energy - e0).abs() < 1e-12 * e0);
            assert!((r.dissipation - r.source).abs() < 1e-12 * e0);
        }
        let d = density_drift(&traj);
        assert!(d.mass < 1e-14 && d.square < 1e-14);
    }

    #[test]
    fn determinant_window_guards() {
        let g = grid(8);
        let s = equilibrium(&g, 1.0);
        let p0 = PhysParams::new(0.01, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            determinant_residual(&[s.clone(), s.clone()], &p0),
            Err(Error::InvalidWindow)
        ));
        let mut w = vec![s.clone(), s.clone(), s.clone()];
        w[1].time = 0.1;
        w[2].time = 0.25;
        assert!(determinant_residual(&w, &p0).unwrap() < 1e-12);
        assert!(matches!(
            determinant_residual(&w, &params()),
            Err(Error::KappaNonZero(_))
        ));
        let parts = determinant_residual_parts(&w, &params()).unwrap();
        assert!(parts.total < 1e-12 && parts.diffusive < 1e-12);
    }

    #[test]
    fn taylor_green_energy_rate() {
        let g = grid(16);
        let p = PhysParams::new(0.05, 0.05, 1.0, 1.0).unwrap();
        let go = |dt| {
            let ctl = StepControl::fixed(dt, 1.0).unwrap();
            run(&taylor_green(&g), &p, &ctl, &Monitors::default()).unwrap()
        };
        let report = energy_rate_check(&go(0.02), &go(0.01), 1e-6);
        assert!(report.passed, "{report:?}");
        assert!(report.c_disc > 0.0);
    }
}
