//! Fixed-point iteration for the mild (Duhamel) form of the system on a
//! short horizon `[0, t0]`.
//!
//! Time-dependent fields are sampled on `n_time_nodes` uniform nodes. Each
//! Duhamel integral `int_0^t e^{-alpha (t - s)} g(s) ds` is evaluated per
//! Fourier mode with the exponential integrated exactly against the
//! piecewise-linear interpolant of `g`, which is second order in the node
//! spacing and exact for integrands constant in time.
//!
//! The iteration is `U^{n+1} = F(U^n)` with
//! `u = e^{nu t lap} u0 + Q1(u, u) + L1(sigma)`,
//! `sigma = e^{t (kappa lap - 2k)} sigma0 + Q2(u, sigma) + L2(rho)`,
//! `rho = N(u)`.

use rayon::prelude::*;

use crate::dynamics::{convective, stress_divergence, stress_nonlinear, transport, Kinematics};
use crate::error::{Error, Result};
use crate::fields::{PhysParams, SimState, StressField, StressSpectrum};
use crate::spectral::{Grid, ScalarField, Spectrum, VectorField, VectorSpectrum};

/// Sub-steps per node interval beyond which transport gives up.
const MAX_SUBSTEPS: usize = 100_000;

#[derive(Clone, Debug, PartialEq)]
pub struct PicardConfig {
    pub t0: f64,
    pub n_time_nodes: usize,
    pub max_iter: usize,
    /// Threshold on the relative successive difference.
    pub tol: f64,
    /// Courant number of the transport sub-steps.
    pub cfl: f64,
}

impl PicardConfig {
    pub fn new(t0: f64, n_time_nodes: usize, max_iter: usize, tol: f64) -> Result<Self> {
        let cfg = PicardConfig {
            t0,
            n_time_nodes,
            max_iter,
            tol,
            cfl: 0.5,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPicardConfig(m));
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad(format!("t0 must be positive, got {}", self.t0));
        }
        if self.n_time_nodes < 4 {
            return bad(format!("need at least 4 time nodes, got {}", self.n_time_nodes));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.t0 / (self.n_time_nodes - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_time_nodes)
            .map(|m| if m + 1 == self.n_time_nodes { self.t0 } else { m as f64 * h })
            .collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n_time_nodes {
            return Err(Error::InvalidPicardConfig(format!(
                "series has {len} samples, expected {}",
                self.n_time_nodes
            )));
        }
        Ok(())
    }
}

/// Per-mode weights of the Duhamel recursion
/// `I_{m+1} = e^{-alpha h} I_m + w_prev g_m + w_next g_{m+1}`.
struct DuhamelWeights {
    decay: Vec<f64>,
    w_prev: Vec<f64>,
    w_next: Vec<f64>,
}

/// `(1 - e^{-x}) / x` and `(1 - e^{-x}(1 + x)) / x^2`.
fn phi(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (1.0, 0.5);
    }
    let p0 = -(-x).exp_m1() / x;
    if x >= 0.1 {
        return (p0, (1.0 - (-x).exp() * (1.0 + x)) / (x * x));
    }
    // sum_{j>=2} (-1)^j (j - 1) x^(j-2) / j!
    let mut p1 = 0.0;
    let mut term = 0.5;
    for j in 2..14 {
        p1 += (j - 1) as f64 * term;
        term *= -x / (j + 1) as f64;
    }
    (p0, p1)
}

impl DuhamelWeights {
    fn new(grid: &Grid, diffusivity: f64, damping: f64, h: f64) -> Self {
        let ksq = grid.k_sq_table();
        let mut decay = Vec::with_capacity(ksq.len());
        let mut w_prev = Vec::with_capacity(ksq.len());
        let mut w_next = Vec::with_capacity(ksq.len());
        for &k2 in ksq {
            let alpha = diffusivity * k2 + damping;
            let x = alpha * h;
            let (p0, p1) = phi(x);
            decay.push((-x).exp());
            w_prev.push(h * p1);
            w_next.push(h * (p0 - p1));
        }
        DuhamelWeights {
            decay,
            w_prev,
            w_next,
        }
    }

    fn integrate(&self, g: &[Spectrum]) -> Vec<Spectrum> {
        let mut out = Vec::with_capacity(g.len());
        let mut acc = Spectrum::zeros(g[0].grid());
        out.push(acc.clone());
        for m in 0..g.len() - 1 {
            let (gp, gn) = (g[m].coeffs(), g[m + 1].coeffs());
            for (idx, c) in acc.coeffs_mut().iter_mut().enumerate() {
                *c = *c * self.decay[idx] + gp[idx] * self.w_prev[idx] + gn[idx] * self.w_next[idx];
            }
            out.push(acc.clone());
        }
        out
    }

    fn integrate_vector(&self, g: &[VectorSpectrum]) -> Vec<VectorSpectrum> {
        let (xs, ys): (Vec<_>, Vec<_>) = g.iter().map(|v| (v.x.clone(), v.y.clone())).unzip();
        let (ix, iy) = rayon::join(|| self.integrate(&xs), || self.integrate(&ys));
        ix.into_iter()
            .zip(iy)
            .map(|(x, y)| VectorSpectrum { x, y })
            .collect()
    }

    fn integrate_stress(&self, g: &[StressSpectrum]) -> Vec<StressSpectrum> {
        let split = |f: fn(&StressSpectrum) -> &Spectrum| g.iter().map(|s| f(s).clone()).collect::<Vec<_>>();
        let (a, b, c) = (split(|s| &s.a), split(|s| &s.b), split(|s| &s.c));
        let ((ia, ib), ic) = rayon::join(
            || rayon::join(|| self.integrate(&a), || self.integrate(&b)),
            || self.integrate(&c),
        );
        ia.into_iter()
            .zip(ib)
            .zip(ic)
            .map(|((a, b), c)| StressSpectrum { a, b, c })
            .collect()
    }
}

struct Propagators {
    velocity: DuhamelWeights,
    stress: DuhamelWeights,
}

impl Propagators {
    fn new(grid: &Grid, params: &PhysParams, cfg: &PicardConfig) -> Self {
        let h = cfg.spacing();
        Propagators {
            velocity: DuhamelWeights::new(grid, params.nu, 0.0, h),
            stress: DuhamelWeights::new(grid, params.kappa, 2.0 * params.k, h),
        }
    }
}

fn q1_integrand(u: &VectorSpectrum, v: &VectorSpectrum) -> VectorSpectrum {
    convective(&Kinematics::new(u), v).leray_project().scale(-1.0)
}

fn l1_integrand(s: &StressSpectrum, params: &PhysParams) -> VectorSpectrum {
    stress_divergence(s).leray_project().scale(params.big_k)
}

fn q2_integrand(u: &VectorSpectrum, s: &StressSpectrum) -> StressSpectrum {
    stress_nonlinear(&Kinematics::new(u), s)
}

fn l2_integrand(rho: &Spectrum, params: &PhysParams) -> StressSpectrum {
    let g = rho.grid();
    StressSpectrum {
        a: Spectrum::zeros(g),
        b: Spectrum::zeros(g),
        c: rho.scale(4.0 * params.k),
    }
}

fn q1_spec(u: &[VectorSpectrum], v: &[VectorSpectrum], w: &Propagators) -> Vec<VectorSpectrum> {
    let g: Vec<_> = u.par_iter().zip(v).map(|(u, v)| q1_integrand(u, v)).collect();
    w.velocity.integrate_vector(&g)
}

fn l1_spec(s: &[StressSpectrum], params: &PhysParams, w: &Propagators) -> Vec<VectorSpectrum> {
    let g: Vec<_> = s.par_iter().map(|s| l1_integrand(s, params)).collect();
    w.velocity.integrate_vector(&g)
}

fn q2_spec(u: &[VectorSpectrum], s: &[StressSpectrum], w: &Propagators) -> Vec<StressSpectrum> {
    let g: Vec<_> = u.par_iter().zip(s).map(|(u, s)| q2_integrand(u, s)).collect();
    w.stress.integrate_stress(&g)
}

fn l2_spec(rho: &[Spectrum], params: &PhysParams, w: &Propagators) -> Vec<StressSpectrum> {
    let g: Vec<_> = rho.iter().map(|r| l2_integrand(r, params)).collect();
    w.stress.integrate_stress(&g)
}

/// Transport of `rho0` by the velocity linearly interpolated between nodes.
fn n_spec(u: &[VectorSpectrum], rho0: &Spectrum, cfg: &PicardConfig) -> Result<Vec<Spectrum>> {
    let grid = rho0.grid().clone();
    let h = cfg.spacing();
    let dx = grid.spacing();
    let mut out = vec![rho0.clone()];
    let mut rho = rho0.clone();
    let speeds: Vec<f64> = u.par_iter().map(|v| v.to_field().max_magnitude()).collect();
    for m in 0..u.len() - 1 {
        let vmax = speeds[m].max(speeds[m + 1]);
        if !vmax.is_finite() {
            return Err(Error::CflViolation(format!("non-finite velocity at node {m}")));
        }
        let substeps = if vmax == 0.0 {
            0.0
        } else {
            (h * vmax / (cfg.cfl * dx)).ceil().max(1.0)
        };
        if substeps > MAX_SUBSTEPS as f64 {
            return Err(Error::CflViolation(format!(
                "{substeps} transport sub-steps needed between nodes {m} and {}",
                m + 1
            )));
        }
        let substeps = substeps as usize;
        if substeps > 0 {
            let dt = h / substeps as f64;
            let (ua, ub) = (&u[m], &u[m + 1]);
            let vel = |theta: f64| ua.scale(1.0 - theta).axpy(theta, ub);
            let rhs = |theta: f64, r: &Spectrum| transport(&Kinematics::new(&vel(theta)), r).scale(-1.0);
            for j in 0..substeps {
                let th = |frac: f64| (j as f64 + frac) / substeps as f64;
                let r1 = rho.axpy(dt, &rhs(th(0.0), &rho));
                let r2 = rho.scale(0.75).add(&r1.axpy(dt, &rhs(th(1.0), &r1)).scale(0.25));
                let r3 = r2.axpy(dt, &rhs(th(0.5), &r2));
                rho = rho.scale(1.0 / 3.0).add(&r3.scale(2.0 / 3.0));
            }
        }
        out.push(rho.clone());
    }
    Ok(out)
}

/// `-int_0^t e^{nu (t-s) lap} P(u . grad v)(s) ds` at every node.
pub fn op_q1(
    u: &[VectorField],
    v: &[VectorField],
    params: &PhysParams,
    cfg: &PicardConfig,
) -> Result<Vec<VectorField>> {
    cfg.validate()?;
    cfg.check_len(u.len())?;
    cfg.check_len(v.len())?;
    let w = Propagators::new(u[0].grid(), params, cfg);
    let (us, vs) = (vector_spectra(u), vector_spectra(v));
    Ok(q1_spec(&us, &vs, &w).iter().map(VectorSpectrum::to_field).collect())
}

/// `K int_0^t e^{nu (t-s) lap} P(div sigma)(s) ds`.
pub fn op_l1(sigma: &[StressField], params: &PhysParams, cfg: &PicardConfig) -> Result<Vec<VectorField>> {
    cfg.validate()?;
    cfg.check_len(sigma.len())?;
    let w = Propagators::new(sigma[0].grid(), params, cfg);
    let s: Vec<_> = sigma.iter().map(StressField::spectrum).collect();
    Ok(l1_spec(&s, params, &w).iter().map(VectorSpectrum::to_field).collect())
}

/// `int_0^t e^{(t-s)(kappa lap - 2k)} (-u . grad sigma + (grad u) sigma + sigma (grad u)^T)(s) ds`.
pub fn op_q2(
    u: &[VectorField],
    sigma: &[StressField],
    params: &PhysParams,
    cfg: &PicardConfig,
) -> Result<Vec<StressField>> {
    cfg.validate()?;
    cfg.check_len(u.len())?;
    cfg.check_len(sigma.len())?;
    let w = Propagators::new(u[0].grid(), params, cfg);
    let s: Vec<_> = sigma.iter().map(StressField::spectrum).collect();
    Ok(q2_spec(&vector_spectra(u), &s, &w).iter().map(StressSpectrum::to_field).collect())
}

/// `2k int_0^t e^{(t-s)(kappa lap - 2k)} rho(s) I ds`, which only feeds `c`.
pub fn op_l2(rho: &[ScalarField], params: &PhysParams, cfg: &PicardConfig) -> Result<Vec<StressField>> {
    cfg.validate()?;
    cfg.check_len(rho.len())?;
    let w = Propagators::new(rho[0].grid(), params, cfg);
    let r: Vec<_> = rho.iter().map(ScalarField::spectrum).collect();
    Ok(l2_spec(&r, params, &w).iter().map(StressSpectrum::to_field).collect())
}

/// Solves `d_t rho + u . grad rho = 0` from `rho0` with the given velocity.
pub fn op_n(u: &[VectorField], rho0: &ScalarField, cfg: &PicardConfig) -> Result<Vec<ScalarField>> {
    cfg.validate()?;
    cfg.check_len(u.len())?;
    let r = n_spec(&vector_spectra(u), &rho0.spectrum(), cfg)?;
    Ok(r.iter().map(Spectrum::to_field).collect())
}

fn vector_spectra(u: &[VectorField]) -> Vec<VectorSpectrum> {
    u.par_iter().map(VectorField::spectrum).collect()
}

/// A time-sampled triple `(u, sigma, rho)`.
#[derive(Clone, Debug)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub u: Vec<VectorField>,
    pub stress: Vec<StressField>,
    pub rho: Vec<ScalarField>,
}

impl PicardSolution {
    /// The state at the last node, `t = t0`.
    pub fn final_state(&self) -> SimState {
        let m = self.times.len() - 1;
        SimState {
            time: self.times[m],
            u: self.u[m].clone(),
            stress: self.stress[m].clone(),
            rho: self.rho[m].clone(),
        }
    }
}

#[derive(Clone, Debug)]
struct SpecIterate {
    u: Vec<VectorSpectrum>,
    s: Vec<StressSpectrum>,
    r: Vec<Spectrum>,
}

impl SpecIterate {
    fn to_solution(&self, times: Vec<f64>) -> PicardSolution {
        PicardSolution {
            times,
            u: self.u.par_iter().map(VectorSpectrum::to_field).collect(),
            stress: self.s.par_iter().map(StressSpectrum::to_field).collect(),
            rho: self.r.par_iter().map(Spectrum::to_field).collect(),
        }
    }

    fn from_solution(sol: &PicardSolution) -> Self {
        SpecIterate {
            u: vector_spectra(&sol.u),
            s: sol.stress.par_iter().map(StressField::spectrum).collect(),
            r: sol.rho.par_iter().map(ScalarField::spectrum).collect(),
        }
    }

    fn sub(&self, other: &SpecIterate) -> SpecIterate {
        SpecIterate {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a.sub(b)).collect(),
            s: self.s.iter().zip(&other.s).map(|(a, b)| a.sub(b)).collect(),
            r: self.r.iter().zip(&other.r).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        let fin = |s: &Spectrum| s.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite());
        self.u.iter().all(|v| fin(&v.x) && fin(&v.y))
            && self.s.iter().all(|s| fin(&s.a) && fin(&s.b) && fin(&s.c))
            && self.r.iter().all(fin)
    }
}

/// Discrete proxies of the three norms of the solution space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeNorm {
    /// `max_t |u|_{W^{2,2}} + (int_0^t0 |u|_{W^{3,2}}^2)^{1/2}`
    pub x: f64,
    /// `max_t |sigma|_{W^{1,2}} + (int_0^t0 |sigma|_{W^{2,2}}^2)^{1/2}`
    pub y: f64,
    /// `max_t (|rho|_{L^1} + |rho|_{W^{1,2}})`
    pub z: f64,
}

impl CompositeNorm {
    pub fn total(&self) -> f64 {
        self.x + self.y + self.z
    }
}

fn composite_norm(it: &SpecIterate, times: &[f64]) -> CompositeNorm {
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let trapz = |v: &[f64]| crate::diagnostics::ledger::trapezoid(times, |i| v[i]);
    let u2: Vec<f64> = it.u.par_iter().map(|u| u.sobolev_norm_sq(2).sqrt()).collect();
    let u3: Vec<f64> = it.u.par_iter().map(|u| u.sobolev_norm_sq(3)).collect();
    let s1: Vec<f64> = it.s.par_iter().map(|s| s.sobolev_norm_sq(1).sqrt()).collect();
    let s2: Vec<f64> = it.s.par_iter().map(|s| s.sobolev_norm_sq(2)).collect();
    let z: Vec<f64> = it
        .r
        .par_iter()
        .map(|r| r.to_field().l1_norm() + r.sobolev_norm_sq(1).sqrt())
        .collect();
    CompositeNorm {
        x: max(&u2) + trapz(&u3).sqrt(),
        y: max(&s1) + trapz(&s2).sqrt(),
        z: max(&z),
    }
}

/// Norms of every iterate and of successive differences.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PicardHistory {
    /// Composite norms of `U^0, U^1, ...`.
    pub norms: Vec<CompositeNorm>,
    /// Composite norms of `U^{n+1} - U^n`.
    pub differences: Vec<CompositeNorm>,
    /// Largest per-component relative difference of each iteration.
    pub relative: Vec<f64>,
    /// `|U^{n+2} - U^{n+1}| / |U^{n+1} - U^n|` in the summed norm.
    pub ratios: Vec<f64>,
}

impl PicardHistory {
    /// Number of applications of the fixed-point map.
    pub fn iterations(&self) -> usize {
        self.differences.len()
    }

    fn push(&mut self, norm: CompositeNorm, diff: CompositeNorm) {
        let rel = |d: f64, n: f64| if d == 0.0 { 0.0 } else { d / n.max(f64::MIN_POSITIVE) };
        self.relative
            .push(rel(diff.x, norm.x).max(rel(diff.y, norm.y)).max(rel(diff.z, norm.z)));
        if let Some(prev) = self.differences.last() {
            let p = prev.total();
            self.ratios.push(if diff.total() == 0.0 {
                0.0
            } else if p == 0.0 {
                f64::INFINITY
            } else {
                diff.total() / p
            });
        }
        self.norms.push(norm);
        self.differences.push(diff);
    }
}

/// Geometric-mean ratio of successive differences,
/// `(d_last / d_first)^(1 / (m - 1))` over `m` differences; 0 once a
/// difference vanishes.
pub fn contraction_estimate(history: &PicardHistory) -> Result<f64> {
    let d: Vec<f64> = history.differences.iter().map(CompositeNorm::total).collect();
    if d.len() < 2 {
        return Err(Error::ShortHistory {
            needed: 3,
            got: d.len() + 1,
        });
    }
    if d.iter().any(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let m = d.len();
    Ok((d[m - 1] / d[0]).powf(1.0 / (m - 1) as f64))
}

struct Problem<'a> {
    u0: VectorSpectrum,
    s0: StressSpectrum,
    r0: Spectrum,
    params: &'a PhysParams,
    cfg: &'a PicardConfig,
    times: Vec<f64>,
    w: Propagators,
}

impl Problem<'_> {
    fn zeroth(&self) -> SpecIterate {
        let p = self.params;
        SpecIterate {
            u: self.times.iter().map(|&t| self.u0.decay_unchecked(p.nu, 0.0, t)).collect(),
            s: self
                .times
                .iter()
                .map(|&t| self.s0.map(|c| c.decay_unchecked(p.kappa, 2.0 * p.k, t)))
                .collect(),
            r: vec![self.r0.clone(); self.times.len()],
        }
    }

    fn apply(&self, it: &SpecIterate) -> Result<SpecIterate> {
        let free = self.zeroth();
        let p = self.params;
        let ((q1, l1), (q2, l2)) = rayon::join(
            || rayon::join(|| q1_spec(&it.u, &it.u, &self.w), || l1_spec(&it.s, p, &self.w)),
            || rayon::join(|| q2_spec(&it.u, &it.s, &self.w), || l2_spec(&it.r, p, &self.w)),
        );
        let r = n_spec(&it.u, &self.r0, self.cfg)?;
        let u = (0..self.times.len())
            .map(|m| free.u[m].add(&q1[m]).add(&l1[m]))
            .collect();
        let s = (0..self.times.len())
            .map(|m| free.s[m].add(&q2[m]).add(&l2[m]))
            .collect();
        Ok(SpecIterate { u, s, r })
    }
}

fn problem<'a>(
    u0: &VectorField,
    sigma0: &StressField,
    rho0: &ScalarField,
    params: &'a PhysParams,
    cfg: &'a PicardConfig,
) -> Result<Problem<'a>> {
    cfg.validate()?;
    let initial = SimState::new(0.0, u0.clone(), sigma0.clone(), rho0.clone())?;
    if !initial.is_admissible(crate::fields::ADMISSIBLE_TOL) {
        return Err(Error::NotAdmissible("initial stress is not positive".into()));
    }
    Ok(Problem {
        u0: u0.spectrum(),
        s0: sigma0.spectrum(),
        r0: rho0.spectrum(),
        params,
        cfg,
        times: cfg.nodes(),
        w: Propagators::new(rho0.grid(), params, cfg),
    })
}

/// One application of the fixed-point map to `current`.
pub fn picard_map(
    current: &PicardSolution,
    u0: &VectorField,
    sigma0: &StressField,
    rho0: &ScalarField,
    params: &PhysParams,
    cfg: &PicardConfig,
) -> Result<PicardSolution> {
    let pb = problem(u0, sigma0, rho0, params, cfg)?;
    cfg.check_len(current.times.len())?;
    Ok(pb.apply(&SpecIterate::from_solution(current))?.to_solution(pb.times.clone()))
}

/// The zeroth iterate: `u` and `sigma` under their linear semigroups, `rho`
/// frozen at its initial value.
pub fn free_evolution(
    u0: &VectorField,
    sigma0: &StressField,
    rho0: &ScalarField,
    params: &PhysParams,
    cfg: &PicardConfig,
) -> Result<PicardSolution> {
    let pb = problem(u0, sigma0, rho0, params, cfg)?;
    Ok(pb.zeroth().to_solution(pb.times.clone()))
}

/// Composite norms of the difference of two sampled triples.
pub fn composite_difference(a: &PicardSolution, b: &PicardSolution) -> CompositeNorm {
    let d = SpecIterate::from_solution(a).sub(&SpecIterate::from_solution(b));
    composite_norm(&d, &a.times)
}

pub fn composite(a: &PicardSolution) -> CompositeNorm {
    composite_norm(&SpecIterate::from_solution(a), &a.times)
}

/// Iterates from the free evolution until the largest relative
/// component difference drops below `cfg.tol`.
pub fn picard_iterate(
    u0: &VectorField,
    sigma0: &StressField,
    rho0: &ScalarField,
    params: &PhysParams,
    cfg: &PicardConfig,
) -> Result<(PicardSolution, PicardHistory)> {
    let pb = problem(u0, sigma0, rho0, params, cfg)?;
    let mut history = PicardHistory::default();
    let mut current = pb.zeroth();
    let give_up = |h: &PicardHistory| Error::PicardNonConvergence {
        iterations: h.iterations(),
        last_ratio: h.ratios.last().copied().unwrap_or(f64::INFINITY),
    };
    for _ in 0..cfg.max_iter {
        let next = match pb.apply(&current) {
            Ok(n) if n.is_finite() => n,
            Ok(_) | Err(Error::CflViolation(_)) if history.iterations() > 0 => {
                return Err(give_up(&history))
            }
            Ok(_) => return Err(Error::NumericalFailure {
                time: cfg.t0,
                reason: "first Picard iterate is not finite".into(),
            }),
            Err(e) => return Err(e),
        };
        let diff = composite_norm(&next.sub(&current), &pb.times);
        let norm = composite_norm(&next, &pb.times);
        history.push(norm, diff);
        current = next;
        if *history.relative.last().unwrap() < cfg.tol {
            return Ok((current.to_solution(pb.times.clone()), history));
        }
        let first = history.differences[0].total();
        if !(diff.total() <= 1e8 * first) {
            return Err(give_up(&history));
        }
    }
    Err(give_up(&history))
}
