//! Initial states for the named presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Preset, RunConfig};
use super::snapshot::read_snapshot;
use crate::diagnostics::positivity_report;
use crate::error::{Error, Result};
use crate::fields::{SimState, StressField};
use crate::spectral::{perp_grad, Grid, ScalarField, VectorField};

/// Random trigonometric polynomial with wavenumber indices up to `modes`,
/// zero mean, scaled to unit maximum.
pub fn band_limited(grid: &Grid, modes: usize, rng: &mut impl Rng) -> ScalarField {
    let m = modes as i64;
    let k0 = grid.wavenumber_scale();
    let mut terms = Vec::new();
    for mx in 0..=m {
        for my in -m..=m {
            if mx == 0 && my <= 0 {
                continue;
            }
            let decay = 1.0 / (1.0 + (mx * mx + my * my) as f64);
            let (p, q) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            terms.push((mx as f64 * k0, my as f64 * k0, p * decay, q * decay));
        }
    }
    let f = ScalarField::from_fn(grid, |x, y| {
        terms
            .iter()
            .map(|(kx, ky, p, q)| {
                let ph = kx * x + ky * y;
                p * ph.cos() + q * ph.sin()
            })
            .sum()
    });
    let peak = f.max_abs();
    if peak > 0.0 {
        f.scale(1.0 / peak)
    } else {
        f
    }
}

/// `u0 = 0`, `sigma0 = rho0 I`, `rho = rho0`.
pub fn equilibrium(grid: &Grid, rho0: f64) -> Result<SimState> {
    let rho = ScalarField::constant(grid, rho0);
    SimState::new(0.0, VectorField::zeros(grid), StressField::isotropic(&rho), rho)
}

/// `u = A (sin kx cos ky, -cos kx sin ky)` with the fundamental wavenumber.
pub fn taylor_green(grid: &Grid, amplitude: f64) -> Result<SimState> {
    let k0 = grid.wavenumber_scale();
    let u = VectorField::new(
        ScalarField::from_fn(grid, |x, y| amplitude * (k0 * x).sin() * (k0 * y).cos()),
        ScalarField::from_fn(grid, |x, y| -amplitude * (k0 * x).cos() * (k0 * y).sin()),
    )?;
    SimState::new(0.0, u, StressField::zeros(grid), ScalarField::zeros(grid))
}

/// Seeded smooth data: density `rho0 (1 + R/4)`, anisotropic stress
/// components of size `stress_amplitude`, and `c = 2 sqrt(a^2 + b^2 + d)`
/// with `d` between `rho0^2 / 2` and `rho0^2`, so the stress is strictly
/// positive definite. The velocity is a random divergence-free field with
/// peak speed `amplitude`.
pub fn random_admissible(
    grid: &Grid,
    rho0: f64,
    amplitude: f64,
    stress_amplitude: f64,
    modes: usize,
    seed: u64,
) -> Result<SimState> {
    if !(rho0 > 0.0) {
        return Err(Error::ConfigValue(
            "random_admissible needs rho0 > 0 for a strictly positive stress".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = band_limited(grid, modes, &mut rng);
    let a = band_limited(grid, modes, &mut rng).scale(stress_amplitude);
    let b = band_limited(grid, modes, &mut rng).scale(stress_amplitude);
    let r = band_limited(grid, modes, &mut rng);
    let dfield = band_limited(grid, modes, &mut rng);

    let u = perp_grad(&psi.spectrum()).to_field();
    let peak = u.max_magnitude();
    let u = if peak > 0.0 {
        VectorField::new(u.x.scale(amplitude / peak), u.y.scale(amplitude / peak))?
    } else {
        u
    };
    let rho = r.map(|v| rho0 * (1.0 + 0.25 * v));
    let d = dfield.map(|v| rho0 * rho0 * (0.75 + 0.25 * v));
    let mag = a.zip_map(&b, |a, b| a * a + b * b);
    let c = mag.zip_map(&d, |m, d| 2.0 * (m + d).sqrt());
    SimState::new(0.0, u, StressField::new(a, b, c)?, rho)
}

/// Seeded state in which every field is a trigonometric polynomial with
/// indices up to `modes`, so products of up to three fields stay resolved
/// when `9 modes <= n - 2`. The stress keeps `gamma >= rho0 / 2`.
pub fn band_limited_state(
    grid: &Grid,
    rho0: f64,
    amplitude: f64,
    stress_amplitude: f64,
    modes: usize,
    seed: u64,
) -> Result<SimState> {
    if !(rho0 > 0.0) {
        return Err(Error::ConfigValue("band-limited states need rho0 > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = band_limited(grid, modes, &mut rng);
    let a = band_limited(grid, modes, &mut rng).scale(stress_amplitude);
    let b = band_limited(grid, modes, &mut rng).scale(stress_amplitude);
    let r = band_limited(grid, modes, &mut rng);
    let w = band_limited(grid, modes, &mut rng);
    let u = perp_grad(&psi.spectrum()).to_field();
    let peak = u.max_magnitude();
    let s = if peak > 0.0 { amplitude / peak } else { 0.0 };
    let u = VectorField::new(u.x.scale(s), u.y.scale(s))?;
    let floor = 2.0 * a.zip_map(&b, |a, b| a.hypot(b)).max() + 0.75 * rho0;
    let c = w.map(|v| floor + 0.25 * rho0 * (1.0 + v));
    let rho = r.map(|v| rho0 * (1.0 + 0.25 * v));
    SimState::new(0.0, u, StressField::new(a, b, c)?, rho)
}

/// Small smooth data: low-mode velocity with `|u|_{W^{2,2}} = w22`,
/// stress a small perturbation of `rho I` and density near `rho0`.
pub fn small_smooth_state(grid: &Grid, rho0: f64, w22: f64, seed: u64) -> Result<SimState> {
    let mut st = band_limited_state(grid, rho0, 1.0, 0.05 * rho0, 2, seed)?;
    let norm = st.u.spectrum().sobolev_norm_sq(2).sqrt();
    if norm > 0.0 {
        st.u = VectorField::new(st.u.x.scale(w22 / norm), st.u.y.scale(w22 / norm))?;
    }
    let shift = 2.0 * rho0 - st.stress.c.mean();
    st.stress.c = st.stress.c.map(|v| v + shift.max(0.0));
    Ok(st)
}

/// Builds the configured initial state and checks its positivity.
pub fn build_initial(cfg: &RunConfig, grid: &Grid) -> Result<SimState> {
    let ic = &cfg.initial;
    let state = match &ic.preset {
        Preset::Equilibrium => equilibrium(grid, ic.rho0)?,
        Preset::TaylorGreen => taylor_green(grid, ic.amplitude)?,
        Preset::RandomAdmissible => random_admissible(
            grid,
            ic.rho0,
            ic.amplitude,
            ic.stress_amplitude,
            ic.modes,
            ic.seed,
        )?,
        Preset::Snapshot(path) => read_snapshot(path, grid)?,
    };
    let report = positivity_report(&state, cfg.monitors.positivity_tol);
    if !report.passed {
        return Err(Error::NotAdmissible(format!(
            "initial state fails positivity: min eigenvalue {:e}, min rho {:e}",
            report.min_eigenvalue, report.min_rho
        )));
    }
    Ok(state)
}
