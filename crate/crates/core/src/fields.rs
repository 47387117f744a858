//! State types for the coupled velocity / stress / density system, plus the
//! tensor algebra and norm conventions used by every diagnostic.
//!
//! The symmetric stress is stored as `(a, b, c)` with
//! `sigma = [[c/2 + a, b], [b, c/2 - a]]`. Matrix norms are Frobenius:
//! `|sigma|^2 = c^2/2 + 2a^2 + 2b^2`. The matrix `L^1` norm is the trace
//! integral `integral c`, meaningful for positive states.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::spectral::{Grid, ScalarField, Spectrum, VectorField, VectorSpectrum};

/// Physical coefficients: viscosity `nu` (cm^2/s), stress diffusivity
/// `kappa` (cm^2/s), damping frequency `k` (1/s), coupling `big_k` (cm^2/s^2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysParams {
    pub nu: f64,
    pub kappa: f64,
    pub k: f64,
    pub big_k: f64,
}

impl PhysParams {
    pub fn new(nu: f64, kappa: f64, k: f64, big_k: f64) -> Result<Self> {
        let check = |name: &str, v: f64, strict: bool| -> Result<()> {
            let ok = v.is_finite() && if strict { v > 0.0 } else { v >= 0.0 };
            if ok {
                Ok(())
            } else {
                let rel = if strict { "> 0" } else { ">= 0" };
                Err(Error::InvalidParams(format!("{name} = {v} violates {name} {rel}")))
            }
        };
        check("nu", nu, true)?;
        check("kappa", kappa, false)?;
        check("k", k, true)?;
        check("bigK", big_k, true)?;
        Ok(PhysParams { nu, kappa, k, big_k })
    }

    /// Damping rate of stress mode `k`: `kappa |k|^2 + 2k`.
    pub fn stress_rate(&self, k_sq: f64) -> f64 {
        self.kappa * k_sq + 2.0 * self.k
    }
}

/// Symmetric stress in `(a, b, c)` coordinates.
#[derive(Clone, Debug)]
pub struct StressField {
    pub a: ScalarField,
    pub b: ScalarField,
    pub c: ScalarField,
}

impl StressField {
    pub fn new(a: ScalarField, b: ScalarField, c: ScalarField) -> Result<Self> {
        a.same_grid(&b)?;
        a.same_grid(&c)?;
        Ok(StressField { a, b, c })
    }

    pub fn zeros(grid: &Grid) -> Self {
        StressField {
            a: ScalarField::zeros(grid),
            b: ScalarField::zeros(grid),
            c: ScalarField::zeros(grid),
        }
    }

    /// `rho * I`
    pub fn isotropic(rho: &ScalarField) -> Self {
        let grid = rho.grid();
        StressField {
            a: ScalarField::zeros(grid),
            b: ScalarField::zeros(grid),
            c: rho.scale(2.0),
        }
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }

    /// Returns `(sigma11, sigma12, sigma22)`.
    pub fn to_matrix(&self) -> (ScalarField, ScalarField, ScalarField) {
        (
            self.c.zip_map(&self.a, |c, a| 0.5 * c + a),
            self.b.clone(),
            self.c.zip_map(&self.a, |c, a| 0.5 * c - a),
        )
    }

    /// `c^2/4 - a^2 - b^2`
    pub fn determinant(&self) -> ScalarField {
        let ab = self.a.zip_map(&self.b, |a, b| a * a + b * b);
        self.c.zip_map(&ab, |c, ab| 0.25 * c * c - ab)
    }

    pub fn min_eigenvalue(&self) -> ScalarField {
        min_eigenvalue(self)
    }

    pub fn gamma(&self) -> ScalarField {
        gamma_field(self)
    }

    pub fn spectrum(&self) -> StressSpectrum {
        StressSpectrum {
            a: self.a.spectrum(),
            b: self.b.spectrum(),
            c: self.c.spectrum(),
        }
    }

    /// Pointwise Frobenius norm squared.
    pub fn frobenius_sq(&self) -> ScalarField {
        let ab = self.a.zip_map(&self.b, |a, b| 2.0 * (a * a + b * b));
        self.c.zip_map(&ab, |c, ab| 0.5 * c * c + ab)
    }
}

/// `a = (s11 - s22)/2`, `b = s12`, `c = s11 + s22`.
pub fn stress_from_matrix(
    s11: &ScalarField,
    s12: &ScalarField,
    s22: &ScalarField,
) -> Result<StressField> {
    s11.same_grid(s12)?;
    s11.same_grid(s22)?;
    Ok(StressField {
        a: s11.zip_map(s22, |p, q| 0.5 * (p - q)),
        b: s12.clone(),
        c: s11.zip_map(s22, |p, q| p + q),
    })
}

/// Smaller eigenvalue `c/2 - sqrt(a^2 + b^2)` at every point.
pub fn min_eigenvalue(s: &StressField) -> ScalarField {
    let r = s.a.zip_map(&s.b, f64::hypot);
    s.c.zip_map(&r, |c, r| 0.5 * c - r)
}

/// `gamma = c - 2 sqrt(a^2 + b^2)`, twice the smaller eigenvalue.
pub fn gamma_field(s: &StressField) -> ScalarField {
    let r = s.a.zip_map(&s.b, f64::hypot);
    s.c.zip_map(&r, |c, r| c - 2.0 * r)
}

#[derive(Clone, Debug)]
pub struct StressSpectrum {
    pub a: Spectrum,
    pub b: Spectrum,
    pub c: Spectrum,
}

impl StressSpectrum {
    pub fn zeros(grid: &Grid) -> Self {
        StressSpectrum {
            a: Spectrum::zeros(grid),
            b: Spectrum::zeros(grid),
            c: Spectrum::zeros(grid),
        }
    }

    pub fn to_field(&self) -> StressField {
        StressField {
            a: self.a.to_field(),
            b: self.b.to_field(),
            c: self.c.to_field(),
        }
    }

    pub fn map(&self, f: impl Fn(&Spectrum) -> Spectrum) -> StressSpectrum {
        StressSpectrum {
            a: f(&self.a),
            b: f(&self.b),
            c: f(&self.c),
        }
    }

    pub fn zip(&self, other: &StressSpectrum, f: impl Fn(&Spectrum, &Spectrum) -> Spectrum) -> Self {
        StressSpectrum {
            a: f(&self.a, &other.a),
            b: f(&self.b, &other.b),
            c: f(&self.c, &other.c),
        }
    }

    pub fn add(&self, other: &StressSpectrum) -> Self {
        self.zip(other, Spectrum::add)
    }

    pub fn sub(&self, other: &StressSpectrum) -> Self {
        self.zip(other, Spectrum::sub)
    }

    /// Frobenius-weighted combination of per-component quadratic forms.
    fn frobenius(&self, q: impl Fn(&Spectrum) -> f64) -> f64 {
        0.5 * q(&self.c) + 2.0 * q(&self.a) + 2.0 * q(&self.b)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.frobenius(Spectrum::l2_norm_sq)
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.frobenius(Spectrum::grad_norm_sq)
    }

    pub fn lap_norm_sq(&self) -> f64 {
        self.frobenius(Spectrum::lap_norm_sq)
    }

    pub fn sobolev_norm_sq(&self, m: i32) -> f64 {
        self.frobenius(|s| s.sobolev_norm_sq(m))
    }
}

/// The triple `(u, sigma, rho)` at one time.
#[derive(Clone, Debug)]
pub struct SimState {
    pub time: f64,
    pub u: VectorField,
    pub stress: StressField,
    pub rho: ScalarField,
}

impl SimState {
    /// Validates grids, incompressibility and the sign of `rho`.
    pub fn new(time: f64, u: VectorField, stress: StressField, rho: ScalarField) -> Result<Self> {
        u.x.same_grid(&stress.a)?;
        u.x.same_grid(&rho)?;
        let state = SimState {
            time,
            u,
            stress,
            rho,
        };
        let div = state.divergence_defect();
        if div > 1e-12 {
            return Err(Error::NotAdmissible(format!(
                "velocity divergence {div:e} exceeds 1e-12 relative"
            )));
        }
        let (rmin, rmax) = (state.rho.min(), state.rho.max());
        if rmin < -1e-10 * rmax.max(1.0) {
            return Err(Error::NotAdmissible(format!("rho has negative minimum {rmin:e}")));
        }
        Ok(state)
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    /// Largest divergence coefficient relative to the velocity size
    /// (rms times the wavenumber scale).
    pub fn divergence_defect(&self) -> f64 {
        let us = self.u.spectrum();
        let div = us.divergence().max_abs_coeff();
        let scale = (us.x.rms().powi(2) + us.y.rms().powi(2)).sqrt()
            * self.grid().wavenumber_scale();
        if div == 0.0 {
            0.0
        } else {
            div / scale.max(f64::MIN_POSITIVE)
        }
    }

    pub fn spectra(&self) -> SpectralState {
        SpectralState {
            time: self.time,
            u: self.u.spectrum(),
            stress: self.stress.spectrum(),
            rho: self.rho.spectrum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.x.is_finite()
            && self.u.y.is_finite()
            && self.stress.a.is_finite()
            && self.stress.b.is_finite()
            && self.stress.c.is_finite()
            && self.rho.is_finite()
    }

    /// Minimum of `gamma` against `-tol * max(1, max c)`.
    pub fn is_admissible(&self, tol: f64) -> bool {
        let scale = self.stress.c.max().max(1.0);
        self.is_finite() && gamma_field(&self.stress).min() >= -tol * scale
    }
}

/// Positivity tolerance for admissible states.
pub const ADMISSIBLE_TOL: f64 = 1e-10;

/// Spectral coefficients of a [`SimState`].
#[derive(Clone, Debug)]
pub struct SpectralState {
    pub time: f64,
    pub u: VectorSpectrum,
    pub stress: StressSpectrum,
    pub rho: Spectrum,
}

impl SpectralState {
    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }

    pub fn to_state(&self) -> SimState {
        SimState {
            time: self.time,
            u: self.u.to_field(),
            stress: self.stress.to_field(),
            rho: self.rho.to_field(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEntry {
    pub value: f64,
    pub units: &'static str,
}

/// Named norms of a state; every value is nonnegative.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormReport {
    entries: BTreeMap<String, NormEntry>,
}

impl NormReport {
    pub fn insert(&mut self, name: &str, value: f64, units: &'static str) {
        self.entries.insert(name.to_string(), NormEntry { value, units });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|e| e.value)
    }

    pub fn entry(&self, name: &str) -> Option<&NormEntry> {
        self.entries.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &NormEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Every norm used by the energy ledger and the a priori bounds.
pub fn norms(state: &SimState) -> NormReport {
    norms_with_spectra(state, &state.spectra())
}

pub(crate) fn norms_with_spectra(state: &SimState, spec: &SpectralState) -> NormReport {
    let mut r = NormReport::default();
    let omega = spec.u.curl();

    r.insert("u_L2", spec.u.l2_norm_sq().sqrt(), "cm^2/s");
    let speed4 = state
        .u
        .x
        .zip_map(&state.u.y, |a, b| (a * a + b * b).powi(2));
    r.insert("u_L4", speed4.integral().powf(0.25), "cm^(3/2)/s");
    r.insert("u_Linf", state.u.max_magnitude(), "cm/s");
    r.insert("grad_u_L2", spec.u.grad_norm_sq().sqrt(), "cm/s");
    r.insert("u_W22", spec.u.sobolev_norm_sq(2).sqrt(), "mixed");

    r.insert("sigma_L1", state.stress.c.integral().max(0.0), "cm^2");
    r.insert("sigma_L2", spec.stress.l2_norm_sq().sqrt(), "cm");
    let frob = state.stress.frobenius_sq();
    r.insert(
        "sigma_L4",
        frob.map(|f| f * f).integral().powf(0.25),
        "cm^(1/2)",
    );
    r.insert("grad_sigma_L2", spec.stress.grad_norm_sq().sqrt(), "1");
    r.insert("lap_sigma_L2", spec.stress.lap_norm_sq().sqrt(), "1/cm");

    r.insert("omega_L2", omega.l2_norm_sq().sqrt(), "cm/s");
    r.insert("grad_omega_L2", omega.grad_norm_sq().sqrt(), "1/s");
    r.insert("lap_omega_L2", omega.lap_norm_sq().sqrt(), "1/(cm s)");

    let rho_l2 = spec.rho.l2_norm_sq().sqrt();
    let grad_rho = spec.rho.grad_norm_sq().sqrt();
    r.insert("rho_L1", state.rho.l1_norm(), "cm^2");
    r.insert("rho_L2", rho_l2, "cm");
    r.insert("grad_rho_L2", grad_rho, "1");
    r.insert("rho_W12", rho_l2.hypot(grad_rho), "mixed");

    r.insert("c_max", state.stress.c.max_abs(), "1");
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        make_grid(n, 2.0 * PI).unwrap()
    }

    #[test]
    fn params_invariants() {
        assert!(PhysParams::new(0.01, 0.01, 1.0, 1.0).is_ok());
        assert!(PhysParams::new(0.01, 0.0, 1.0, 1.0).is_ok());
        assert!(PhysParams::new(0.0, 0.01, 1.0, 1.0).is_err());
        assert!(PhysParams::new(0.01, -1.0, 1.0, 1.0).is_err());
        assert!(PhysParams::new(0.01, 0.01, 0.0, 1.0).is_err());
        assert!(PhysParams::new(0.01, 0.01, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn identity_matrix_to_abc() {
        let g = grid(8);
        let one = ScalarField::constant(&g, 1.0);
        let zero = ScalarField::zeros(&g);
        let s = stress_from_matrix(&one, &zero, &one).unwrap();
        assert_eq!(s.a.max_abs(), 0.0);
        assert_eq!(s.b.max_abs(), 0.0);
        assert_eq!(s.c.min(), 2.0);
        assert_eq!(s.c.max(), 2.0);
        assert_eq!(s.min_eigenvalue().min(), 1.0);
    }

    #[test]
    fn determinant_matches_matrix() {
        let g = grid(8);
        let s = stress_from_matrix(
            &ScalarField::constant(&g, 2.0),
            &ScalarField::zeros(&g),
            &ScalarField::constant(&g, 1.0),
        )
        .unwrap();
        assert_eq!(s.a.max(), 0.5);
        assert_eq!(s.c.max(), 3.0);
        assert_eq!(s.determinant().max(), 2.0);
    }

    #[test]
    fn rank_one_boundary() {
        let g = grid(8);
        let s = StressField::new(
            ScalarField::constant(&g, 3.0),
            ScalarField::constant(&g, 4.0),
            ScalarField::constant(&g, 10.0),
        )
        .unwrap();
        assert_eq!(s.min_eigenvalue().max_abs(), 0.0);
        assert_eq!(s.gamma().max_abs(), 0.0);

        let s = StressField::new(
            ScalarField::zeros(&g),
            ScalarField::zeros(&g),
            ScalarField::constant(&g, 5.0),
        )
        .unwrap();
        assert_eq!(s.gamma().min(), 5.0);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = ScalarField::zeros(&grid(8));
        let b = ScalarField::zeros(&grid(16));
        assert!(matches!(
            stress_from_matrix(&a, &a, &b),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn constant_state_norms() {
        let g = grid(16);
        let rho = ScalarField::constant(&g, 1.0);
        let state = SimState::new(
            0.0,
            VectorField::zeros(&g),
            StressField::isotropic(&rho),
            rho,
        )
        .unwrap();
        let n = norms(&state);
        let area = 4.0 * PI * PI;
        assert_eq!(n.get("u_L2"), Some(0.0));
        assert!((n.get("sigma_L1").unwrap() - 2.0 * area).abs() < 1e-12);
        assert!((n.get("rho_L1").unwrap() - area).abs() < 1e-12);
        assert!(n.iter().all(|(_, e)| e.value >= 0.0));
    }

    #[test]
    fn shear_flow_l2() {
        // integral of sin^2 y over the torus is 2 pi * pi
        let g = grid(32);
        let u = VectorField::new(
            ScalarField::from_fn(&g, |_, y| y.sin()),
            ScalarField::zeros(&g),
        )
        .unwrap();
        let z = ScalarField::zeros(&g);
        let state = SimState::new(0.0, u, StressField::zeros(&g), z).unwrap();
        let n = norms(&state);
        let u_l2 = n.get("u_L2").unwrap();
        assert!((u_l2 * u_l2 - 2.0 * PI * PI).abs() < 1e-12);
        assert!((n.get("omega_L2").unwrap().powi(2) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn divergent_velocity_is_rejected() {
        let g = grid(16);
        let u = VectorField::new(
            ScalarField::from_fn(&g, |x, _| x.sin()),
            ScalarField::zeros(&g),
        )
        .unwrap();
        let z = ScalarField::zeros(&g);
        assert!(SimState::new(0.0, u, StressField::zeros(&g), z).is_err());
    }
}
