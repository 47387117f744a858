//! Right-hand sides of the coupled velocity / stress / density system.
//!
//! Every quadratic product is formed from dealiased factors and dealiased
//! again after the pointwise multiplication. The polymer forcing
//! `K div sigma` is truncated to the resolved band as well, so a velocity
//! that starts inside the 2/3 mask stays there.

use crate::error::{Error, Result};
use crate::fields::{PhysParams, SimState, SpectralState, StressField, StressSpectrum};
use crate::spectral::{
    backward_all, forward_all, Axis, ScalarField, Spectrum, VectorField, VectorSpectrum,
};

/// Rate of strain `(lambda, mu)` and vorticity `omega` of a velocity.
#[derive(Clone, Debug)]
pub struct StrainDecomposition {
    pub lambda: ScalarField,
    pub mu: ScalarField,
    pub omega: ScalarField,
}

/// Time derivative of every state component.
#[derive(Clone, Debug)]
pub struct StateDerivative {
    pub du: VectorField,
    pub da: ScalarField,
    pub db: ScalarField,
    pub dc: ScalarField,
    pub drho: ScalarField,
}

/// `lambda = (d1 u1 - d2 u2)/2`, `mu = (d1 u2 + d2 u1)/2`, `omega = d1 u2 - d2 u1`.
pub fn strain_decompose(u: &VectorField) -> StrainDecomposition {
    let us = u.spectrum();
    let g = backward_all(&[
        us.x.ddx(Axis::X),
        us.x.ddx(Axis::Y),
        us.y.ddx(Axis::X),
        us.y.ddx(Axis::Y),
    ]);
    let (d1u1, d2u1, d1u2, d2u2) = (&g[0], &g[1], &g[2], &g[3]);
    StrainDecomposition {
        lambda: d1u1.zip_map(d2u2, |p, q| 0.5 * (p - q)),
        mu: d1u2.zip_map(d2u1, |p, q| 0.5 * (p + q)),
        omega: d1u2.sub(d2u1),
    }
}

/// Dealiased velocity and its gradient on the grid points.
pub(crate) struct Kinematics {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    /// `d_j u^i` stored as `[d1u1, d2u1, d1u2, d2u2]`.
    pub grad: [Vec<f64>; 4],
}

impl Kinematics {
    pub fn new(u: &VectorSpectrum) -> Self {
        let ud = u.dealias();
        let mut f = backward_all(&[
            ud.x.clone(),
            ud.y.clone(),
            ud.x.ddx(Axis::X),
            ud.x.ddx(Axis::Y),
            ud.y.ddx(Axis::X),
            ud.y.ddx(Axis::Y),
        ])
        .into_iter()
        .map(ScalarField::into_values);
        let mut next = || f.next().expect("six transforms");
        Kinematics {
            u1: next(),
            u2: next(),
            grad: [next(), next(), next(), next()],
        }
    }

    #[inline]
    fn lambda(&self, i: usize) -> f64 {
        0.5 * (self.grad[0][i] - self.grad[3][i])
    }

    #[inline]
    fn mu(&self, i: usize) -> f64 {
        0.5 * (self.grad[2][i] + self.grad[1][i])
    }

    #[inline]
    fn omega(&self, i: usize) -> f64 {
        self.grad[2][i] - self.grad[1][i]
    }
}

/// Dealiased values and gradients of a batch of scalar spectra.
fn values_and_gradients(fields: &[&Spectrum]) -> Vec<[Vec<f64>; 3]> {
    let mut batch = Vec::with_capacity(3 * fields.len());
    for f in fields {
        let d = f.dealias();
        batch.push(d.ddx(Axis::X));
        batch.push(d.ddx(Axis::Y));
        batch.push(d);
    }
    let mut out = backward_all(&batch).into_iter().map(ScalarField::into_values);
    fields
        .iter()
        .map(|_| {
            let dx = out.next().unwrap();
            let dy = out.next().unwrap();
            let v = out.next().unwrap();
            [v, dx, dy]
        })
        .collect()
}

fn spectra_of(grid: &crate::spectral::Grid, values: Vec<Vec<f64>>) -> Vec<Spectrum> {
    let fields: Vec<ScalarField> = values
        .into_iter()
        .map(|v| ScalarField::new(grid.clone(), v).expect("grid-sized buffer"))
        .collect();
    forward_all(&fields)
        .into_iter()
        .map(|s| s.dealias())
        .collect()
}

/// `D(u . grad f)`
pub(crate) fn transport(kin: &Kinematics, f: &Spectrum) -> Spectrum {
    let vg = values_and_gradients(&[f]);
    let [_, fx, fy] = &vg[0];
    let prod: Vec<f64> = (0..fx.len())
        .map(|i| kin.u1[i] * fx[i] + kin.u2[i] * fy[i])
        .collect();
    spectra_of(f.grid(), vec![prod]).pop().unwrap()
}

/// `D(u . grad v)` for a second vector field `v`.
pub(crate) fn convective(kin: &Kinematics, v: &VectorSpectrum) -> VectorSpectrum {
    let vg = values_and_gradients(&[&v.x, &v.y]);
    let n = kin.u1.len();
    let adv = |g: &[Vec<f64>; 3]| -> Vec<f64> {
        (0..n)
            .map(|i| kin.u1[i] * g[1][i] + kin.u2[i] * g[2][i])
            .collect()
    };
    let mut s = spectra_of(v.grid(), vec![adv(&vg[0]), adv(&vg[1])]);
    let y = s.pop().unwrap();
    let x = s.pop().unwrap();
    VectorSpectrum { x, y }
}

/// `D(u . grad u)` reusing the gradient held by `kin`.
pub(crate) fn self_convective(kin: &Kinematics, grid: &crate::spectral::Grid) -> VectorSpectrum {
    let n = kin.u1.len();
    let a1: Vec<f64> = (0..n)
        .map(|i| kin.u1[i] * kin.grad[0][i] + kin.u2[i] * kin.grad[1][i])
        .collect();
    let a2: Vec<f64> = (0..n)
        .map(|i| kin.u1[i] * kin.grad[2][i] + kin.u2[i] * kin.grad[3][i])
        .collect();
    let mut s = spectra_of(grid, vec![a1, a2]);
    let y = s.pop().unwrap();
    let x = s.pop().unwrap();
    VectorSpectrum { x, y }
}

/// Transport and stretching terms of the stress equation in `(a, b, c)`:
/// `-u . grad sigma + (grad u) sigma + sigma (grad u)^T`, dealiased.
pub(crate) fn stress_nonlinear(kin: &Kinematics, s: &StressSpectrum) -> StressSpectrum {
    let vg = values_and_gradients(&[&s.a, &s.b, &s.c]);
    let n = kin.u1.len();
    let adv = |g: &[Vec<f64>; 3], i: usize| kin.u1[i] * g[1][i] + kin.u2[i] * g[2][i];
    let (a, b, c) = (&vg[0][0], &vg[1][0], &vg[2][0]);
    let mut na = vec![0.0; n];
    let mut nb = vec![0.0; n];
    let mut nc = vec![0.0; n];
    for i in 0..n {
        let (lam, mu, om) = (kin.lambda(i), kin.mu(i), kin.omega(i));
        na[i] = -adv(&vg[0], i) - om * b[i] + c[i] * lam;
        nb[i] = -adv(&vg[1], i) + om * a[i] + c[i] * mu;
        nc[i] = -adv(&vg[2], i) + 4.0 * (lam * a[i] + mu * b[i]);
    }
    let mut out = spectra_of(s.a.grid(), vec![na, nb, nc]);
    let c = out.pop().unwrap();
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    StressSpectrum { a, b, c }
}

/// `D(div sigma)` with `div sigma = (d1(c/2 + a) + d2 b, d1 b + d2(c/2 - a))`.
pub(crate) fn stress_divergence(s: &StressSpectrum) -> VectorSpectrum {
    let half_c = s.c.scale(0.5);
    let s11 = half_c.add(&s.a);
    let s22 = half_c.sub(&s.a);
    VectorSpectrum {
        x: s11.ddx(Axis::X).add(&s.b.ddx(Axis::Y)),
        y: s.b.ddx(Axis::X).add(&s22.ddx(Axis::Y)),
    }
    .dealias()
}

/// Explicit (non-stiff) tendencies used by the integrating-factor stepper.
///
/// The velocity part is `P(-u . grad u + K div sigma)`; the stress part
/// excludes relaxation, diffusion and the `4 k rho` source, which the
/// stepper propagates exactly.
#[derive(Clone, Debug)]
pub(crate) struct Tendency {
    pub u: VectorSpectrum,
    pub stress: StressSpectrum,
    pub rho: Spectrum,
}

pub(crate) fn explicit_tendency(spec: &SpectralState, params: &PhysParams) -> Tendency {
    let kin = Kinematics::new(&spec.u);
    let grid = spec.grid();
    let adv = self_convective(&kin, grid);
    let force = stress_divergence(&spec.stress).scale(params.big_k);
    Tendency {
        u: force.sub(&adv).leray_project(),
        stress: stress_nonlinear(&kin, &spec.stress),
        rho: transport(&kin, &spec.rho).scale(-1.0),
    }
}

/// Adds the linear terms (viscosity, relaxation, diffusion, source) to a
/// set of explicit tendencies.
fn full_derivative(spec: &SpectralState, t: Tendency, params: &PhysParams) -> Tendency {
    let kappa = params.kappa;
    let two_k = 2.0 * params.k;
    let linear = |f: &Spectrum, nl: &Spectrum| nl.add(&f.laplacian().scale(kappa)).axpy(-two_k, f);
    let s = &spec.stress;
    Tendency {
        u: t.u.add(&spec.u.laplacian().scale(params.nu)),
        stress: StressSpectrum {
            a: linear(&s.a, &t.stress.a),
            b: linear(&s.b, &t.stress.b),
            c: linear(&s.c, &t.stress.c).axpy(4.0 * params.k, &spec.rho),
        },
        rho: t.rho,
    }
}

pub(crate) fn derivative_spectra(spec: &SpectralState, params: &PhysParams) -> Tendency {
    let t = explicit_tendency(spec, params);
    full_derivative(spec, t, params)
}

/// Full right-hand side of the coupled system.
pub fn state_derivative(state: &SimState, params: &PhysParams) -> StateDerivative {
    let d = derivative_spectra(&state.spectra(), params);
    let f = backward_all(&[d.u.x, d.u.y, d.stress.a, d.stress.b, d.stress.c, d.rho]);
    let mut it = f.into_iter();
    let mut next = || it.next().unwrap();
    StateDerivative {
        du: VectorField {
            x: next(),
            y: next(),
        },
        da: next(),
        db: next(),
        dc: next(),
        drho: next(),
    }
}

/// `(da, db, dc)`:
/// `da = -u.grad a - omega b + c lambda - 2k a + kappa lap a`,
/// `db = -u.grad b + omega a + c mu - 2k b + kappa lap b`,
/// `dc = -u.grad c + 4(lambda a + mu b) - 2k c + kappa lap c + 4k rho`.
pub fn stress_rhs(state: &SimState, params: &PhysParams) -> StressField {
    let spec = state.spectra();
    let kin = Kinematics::new(&spec.u);
    let nl = stress_nonlinear(&kin, &spec.stress);
    let t = Tendency {
        u: VectorSpectrum::zeros(spec.grid()),
        stress: nl,
        rho: Spectrum::zeros(spec.grid()),
    };
    full_derivative(&spec, t, params).stress.to_field()
}

/// `P(-u . grad u + K div sigma) + nu lap u`, divergence-free.
pub fn momentum_rhs(state: &SimState, params: &PhysParams) -> VectorField {
    let spec = state.spectra();
    let kin = Kinematics::new(&spec.u);
    let adv = self_convective(&kin, spec.grid());
    let force = stress_divergence(&spec.stress).scale(params.big_k);
    force
        .sub(&adv)
        .leray_project()
        .add(&spec.u.laplacian().scale(params.nu))
        .to_field()
}

/// `-u . grad rho`, dealiased.
pub fn rho_rhs(state: &SimState) -> ScalarField {
    let spec = state.spectra();
    let kin = Kinematics::new(&spec.u);
    transport(&kin, &spec.rho).scale(-1.0).to_field()
}

/// Unprojected momentum forcing `-u . grad u + K div sigma` (dealiased).
pub(crate) fn momentum_forcing(spec: &SpectralState, params: &PhysParams) -> VectorSpectrum {
    let kin = Kinematics::new(&spec.u);
    let adv = self_convective(&kin, spec.grid());
    stress_divergence(&spec.stress)
        .scale(params.big_k)
        .sub(&adv)
}

pub(crate) fn pressure_spectrum(forcing: &VectorSpectrum) -> Spectrum {
    // lap p = div(forcing)
    forcing.divergence().invert_laplacian_unchecked()
}

/// Pressure `p = (-lap)^{-1} div(u . grad u - K div sigma)` in the
/// zero-mean gauge. Only a diagnostic; the stepper never needs it.
pub fn recover_pressure(state: &SimState, params: &PhysParams) -> ScalarField {
    let forcing = momentum_forcing(&state.spectra(), params);
    pressure_spectrum(&forcing).to_field()
}

/// L^2 norm of `forcing - grad p - P(forcing)`.
pub(crate) fn pressure_residual(spec: &SpectralState, params: &PhysParams) -> f64 {
    let forcing = momentum_forcing(spec, params);
    let p = pressure_spectrum(&forcing);
    let grad_p = VectorSpectrum {
        x: p.ddx(Axis::X),
        y: p.ddx(Axis::Y),
    };
    forcing
        .sub(&grad_p)
        .sub(&forcing.leray_project())
        .l2_norm_sq()
        .sqrt()
}

/// Transport law of `d = c^2/4 - a^2 - b^2` without stress diffusion:
/// `-u . grad d - 4k d + 2k rho c`.
pub fn determinant_rhs(state: &SimState, params: &PhysParams) -> Result<ScalarField> {
    if params.kappa != 0.0 {
        return Err(Error::KappaNonZero(params.kappa));
    }
    Ok(determinant_law(state, params))
}

pub(crate) fn determinant_law(state: &SimState, params: &PhysParams) -> ScalarField {
    let d = state.stress.determinant();
    let kin = Kinematics::new(&state.u.spectrum());
    let adv = transport(&kin, &d.spectrum()).to_field();
    let k = params.k;
    let rc = state.rho.mul(&state.stress.c);
    let lin = d.zip_map(&rc, |d, rc| -4.0 * k * d + 2.0 * k * rc);
    lin.sub(&adv)
}
