//! Integrating-factor SSP-RK3 time stepping and the monitored run loop.
//!
//! The linear part is propagated exactly per Fourier mode: viscous decay
//! for `u`, diffusion plus relaxation for `a` and `b`, and the coupled
//! `(c, rho)` block `dc = -(kappa |k|^2 + 2k) c + 4k rho`, `drho = 0`, whose
//! exponential is available in closed form. Everything else is explicit.

use std::fmt;

use crate::diagnostics::DiagnosticsRecord;
use crate::dynamics::{explicit_tendency, Tendency};
use crate::error::{Error, Result};
use crate::fields::{PhysParams, SimState, SpectralState, StressSpectrum, ADMISSIBLE_TOL};
use crate::spectral::{Grid, Spectrum, VectorSpectrum};

/// Step-size control.
#[derive(Clone, Debug, PartialEq)]
pub struct StepControl {
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Stride of the rows written to the time series.
    pub output_every: usize,
    /// Times at which full states are kept in the trajectory.
    pub snapshot_times: Vec<f64>,
}

impl StepControl {
    pub fn new(cfl: f64, dt_min: f64, dt_max: f64, t_end: f64, output_every: usize) -> Result<Self> {
        let ctl = StepControl {
            cfl,
            dt_min,
            dt_max,
            t_end,
            output_every,
            snapshot_times: Vec::new(),
        };
        ctl.validate()?;
        Ok(ctl)
    }

    /// A fixed step `dt` up to `t_end`.
    pub fn fixed(dt: f64, t_end: f64) -> Result<Self> {
        StepControl::new(1.0, dt, dt, t_end, 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidStepControl(m));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return bad(format!("dt_min must be positive, got {}", self.dt_min));
        }
        if !(self.dt_max >= self.dt_min && self.dt_max.is_finite()) {
            return bad(format!(
                "dt_max = {} must be at least dt_min = {}",
                self.dt_max, self.dt_min
            ));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be nonnegative, got {}", self.t_end));
        }
        if self.output_every == 0 {
            return bad("output_every must be at least 1".into());
        }
        if self.snapshot_times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return bad("snapshot times must be finite and nonnegative".into());
        }
        Ok(())
    }
}

/// Which invariant a run violated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitorKind {
    NonFinite,
    Overflow,
    DtUnderflow,
    Positivity,
    Gamma,
    Density,
    Energy,
}

impl MonitorKind {
    /// NaN, overflow and step underflow are numerical failures rather than
    /// broken physical invariants.
    pub fn is_numerical(self) -> bool {
        matches!(
            self,
            MonitorKind::NonFinite | MonitorKind::Overflow | MonitorKind::DtUnderflow
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            MonitorKind::NonFinite => "non-finite value",
            MonitorKind::Overflow => "stress ceiling",
            MonitorKind::DtUnderflow => "time-step underflow",
            MonitorKind::Positivity => "minimum eigenvalue",
            MonitorKind::Gamma => "gamma",
            MonitorKind::Density => "density positivity",
            MonitorKind::Energy => "energy inequality",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorViolation {
    pub kind: MonitorKind,
    pub time: f64,
    /// Offending value (a minimum, a maximum, or an energy excess).
    pub value: f64,
    pub limit: f64,
}

impl fmt::Display for MonitorViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} monitor failed at t = {:.6}: value {:e}, limit {:e}",
            self.kind.name(),
            self.time,
            self.value,
            self.limit
        )
    }
}

impl std::error::Error for MonitorViolation {}

/// Thresholds checked after every step, in the order
/// non-finite, ceiling, eigenvalue, gamma, density, energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Monitors {
    /// Relative tolerance for the eigenvalue, gamma and density minima.
    pub positivity_tol: f64,
    /// Abort once `max c` exceeds this.
    pub c_ceiling: f64,
    /// Relative slack of the running energy inequality; `None` disables it.
    pub energy_tol: Option<f64>,
}

impl Default for Monitors {
    fn default() -> Self {
        Monitors {
            positivity_tol: 1e-8,
            c_ceiling: 1e12,
            energy_tol: Some(1e-6),
        }
    }
}

impl Monitors {
    /// Only the non-finite and ceiling guards.
    pub fn numerical_only() -> Self {
        Monitors {
            positivity_tol: f64::INFINITY,
            c_ceiling: 1e12,
            energy_tol: None,
        }
    }
}

/// Diagnostics of every step plus the requested snapshots.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// One record per step, starting with the initial state.
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<SimState>,
    pub final_state: SimState,
    pub steps: usize,
    pub output_every: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    /// Records at the output stride (the rows of the time series).
    pub fn output_records(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        let every = self.output_every.max(1);
        self.records
            .iter()
            .enumerate()
            .filter(move |(i, _)| i % every == 0)
            .map(|(_, r)| r)
    }

    pub fn min_of(&self, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
        self.records.iter().map(f).fold(f64::INFINITY, f64::min)
    }

    pub fn max_of(&self, f: impl Fn(&DiagnosticsRecord) -> f64) -> f64 {
        self.records.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }
}

const SPEED_FLOOR: f64 = 1e-12;

fn advective_dt(state: &SimState, ctl: &StepControl) -> f64 {
    let h = state.grid().spacing();
    ctl.cfl * h / state.u.max_magnitude().max(SPEED_FLOOR)
}

/// `clamp(cfl h / max(|u|_inf, eps), dt_min, dt_max)`; diffusion and
/// relaxation impose no limit since they are integrated exactly.
pub fn compute_dt(state: &SimState, _params: &PhysParams, ctl: &StepControl) -> f64 {
    advective_dt(state, ctl).clamp(ctl.dt_min, ctl.dt_max)
}

fn source_factor(alpha: f64, s: f64) -> f64 {
    // (1 - e^{-alpha s}) / alpha
    if alpha == 0.0 {
        s
    } else {
        -(-alpha * s).exp_m1() / alpha
    }
}

/// Per-mode factors of the exact propagator of the linear part over a
/// (possibly negative) time `s`.
struct LinearFactors {
    s: f64,
    velocity: Vec<f64>,
    stress: Vec<f64>,
    source: Vec<f64>,
}

impl LinearFactors {
    fn new(grid: &Grid, params: &PhysParams, s: f64) -> Self {
        let ksq = grid.k_sq_table();
        let two_k = 2.0 * params.k;
        let mut f = LinearFactors {
            s,
            velocity: Vec::with_capacity(ksq.len()),
            stress: Vec::with_capacity(ksq.len()),
            source: Vec::with_capacity(ksq.len()),
        };
        for &k2 in ksq {
            let alpha = params.kappa * k2 + two_k;
            f.velocity.push((-params.nu * k2 * s).exp());
            f.stress.push((-alpha * s).exp());
            f.source.push(2.0 * two_k * source_factor(alpha, s));
        }
        f
    }

    fn apply(&self, q: &SpectralState) -> SpectralState {
        let decay = |x: &Spectrum, w: &[f64]| x.map_modes(|idx, c| c * w[idx]);
        let c = q
            .stress
            .c
            .zip_modes(&q.rho, |idx, c, r| c * self.stress[idx] + r * self.source[idx]);
        SpectralState {
            time: q.time + self.s,
            u: VectorSpectrum {
                x: decay(&q.u.x, &self.velocity),
                y: decay(&q.u.y, &self.velocity),
            },
            stress: StressSpectrum {
                a: decay(&q.stress.a, &self.stress),
                b: decay(&q.stress.b, &self.stress),
                c,
            },
            rho: q.rho.clone(),
        }
    }
}

/// Integrating-factor SSP-RK3 stepper for one step size, holding the
/// propagator tables it needs.
pub(crate) struct Stepper {
    params: PhysParams,
    dt: f64,
    full: LinearFactors,
    half: LinearFactors,
    back_half: LinearFactors,
}

impl Stepper {
    pub(crate) fn new(grid: &Grid, params: &PhysParams, dt: f64) -> Self {
        Stepper {
            params: *params,
            dt,
            full: LinearFactors::new(grid, params, dt),
            half: LinearFactors::new(grid, params, 0.5 * dt),
            back_half: LinearFactors::new(grid, params, -0.5 * dt),
        }
    }

    pub(crate) fn dt(&self) -> f64 {
        self.dt
    }

    pub(crate) fn advance(&self, q: &SpectralState) -> SpectralState {
        let (p, dt) = (&self.params, self.dt);
        let t0 = q.time;

        let n0 = explicit_tendency(q, p);
        let q1 = self.full.apply(&euler(q, &n0, dt));

        let n1 = explicit_tendency(&q1, p);
        let q2 = combine(
            0.75,
            &self.half.apply(q),
            0.25,
            &self.back_half.apply(&euler(&q1, &n1, dt)),
        );

        let n2 = explicit_tendency(&q2, p);
        let mut q3 = combine(
            1.0 / 3.0,
            &self.full.apply(q),
            2.0 / 3.0,
            &self.half.apply(&euler(&q2, &n2, dt)),
        );
        q3.u = q3.u.leray_project();
        q3.time = t0 + dt;
        q3
    }
}

fn euler(q: &SpectralState, n: &Tendency, dt: f64) -> SpectralState {
    SpectralState {
        time: q.time,
        u: q.u.axpy(dt, &n.u),
        stress: StressSpectrum {
            a: q.stress.a.axpy(dt, &n.stress.a),
            b: q.stress.b.axpy(dt, &n.stress.b),
            c: q.stress.c.axpy(dt, &n.stress.c),
        },
        rho: q.rho.axpy(dt, &n.rho),
    }
}

fn combine(wp: f64, p: &SpectralState, wq: f64, q: &SpectralState) -> SpectralState {
    let s = |x: &Spectrum, y: &Spectrum| x.scale(wp).axpy(wq, y);
    let v = |x: &VectorSpectrum, y: &VectorSpectrum| x.scale(wp).axpy(wq, y);
    SpectralState {
        time: q.time,
        u: v(&p.u, &q.u),
        stress: StressSpectrum {
            a: s(&p.stress.a, &q.stress.a),
            b: s(&p.stress.b, &q.stress.b),
            c: s(&p.stress.c, &q.stress.c),
        },
        rho: s(&p.rho, &q.rho),
    }
}

/// One integrating-factor SSP-RK3 step on spectral data.
pub(crate) fn advance(q: &SpectralState, dt: f64, params: &PhysParams) -> SpectralState {
    Stepper::new(q.grid(), params, dt).advance(q)
}

/// Advances an admissible state by `dt`.
pub fn step(state: &SimState, dt: f64, params: &PhysParams) -> Result<SimState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidStepControl(format!("dt must be positive, got {dt}")));
    }
    if !state.is_admissible(ADMISSIBLE_TOL) {
        return Err(Error::NotAdmissible(format!(
            "min gamma {:e} at t = {}",
            state.stress.gamma().min(),
            state.time
        )));
    }
    Ok(advance(&state.spectra(), dt, params).to_state())
}

fn check_monitors(
    rec: &DiagnosticsRecord,
    monitors: &Monitors,
    energy_budget: f64,
    dissipated: f64,
) -> std::result::Result<(), MonitorViolation> {
    let fail = |kind, value, limit| {
        Err(MonitorViolation {
            kind,
            time: rec.time,
            value,
            limit,
        })
    };
    if !rec.is_finite() {
        return fail(MonitorKind::NonFinite, f64::NAN, 0.0);
    }
    if rec.c_max > monitors.c_ceiling {
        return fail(MonitorKind::Overflow, rec.c_max, monitors.c_ceiling);
    }
    let floor = -monitors.positivity_tol * rec.c_max.max(1.0);
    if rec.min_eigenvalue < floor {
        return fail(MonitorKind::Positivity, rec.min_eigenvalue, floor);
    }
    if rec.min_gamma < floor {
        return fail(MonitorKind::Gamma, rec.min_gamma, floor);
    }
    let rho_floor = -monitors.positivity_tol * rec.rho_max.max(1.0);
    if rec.min_rho < rho_floor {
        return fail(MonitorKind::Density, rec.min_rho, rho_floor);
    }
    if let Some(tol) = monitors.energy_tol {
        let lhs = rec.energy + dissipated;
        let limit = energy_budget * (1.0 + tol) + tol * f64::MIN_POSITIVE;
        if lhs > limit {
            return fail(MonitorKind::Energy, lhs, limit);
        }
    }
    Ok(())
}

fn contains_time(times: &[f64], t: f64) -> bool {
    times.iter().any(|s| (s - t).abs() <= 1e-12 * s.abs().max(1.0))
}

/// Runs from `initial` to `ctl.t_end`, checking `monitors` after every step.
///
/// The running energy monitor enforces
/// `E(t) + 2 nu int_0^t |grad u|^2 <= E(0) + 4 k K t int rho_0`, with the
/// time integral taken by the trapezoid rule.
pub fn run(
    initial: &SimState,
    params: &PhysParams,
    ctl: &StepControl,
    monitors: &Monitors,
) -> Result<Trajectory> {
    ctl.validate()?;
    let mut targets: Vec<f64> = ctl
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > initial.time && *t <= ctl.t_end)
        .collect();
    targets.push(ctl.t_end);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut spec = initial.spectra();
    let mut state = initial.clone();
    let first = DiagnosticsRecord::with_spectra(&state, &spec, params);
    let e0 = first.energy;
    let source_rate = first.source;
    let t_start = initial.time;
    check_monitors(&first, monitors, e0, 0.0)?;

    let mut snapshots = Vec::new();
    if contains_time(&ctl.snapshot_times, initial.time) {
        snapshots.push(state.clone());
    }
    let viscous = |r: &DiagnosticsRecord| {
        let g = r.norms.get("grad_u_L2").unwrap_or(0.0);
        2.0 * params.nu * g * g
    };
    let mut prev_viscous = viscous(&first);
    let mut dissipated = 0.0;
    let mut records = vec![first];
    let mut window: Vec<SimState> = Vec::new();
    if params.kappa == 0.0 {
        window.push(initial.clone());
    }
    let mut steps = 0;
    let mut stepper: Option<Stepper> = None;
    let mut target_iter = targets.into_iter().peekable();

    while let Some(&target) = target_iter.peek() {
        let remaining = target - spec.time;
        if remaining <= 1e-12 * target.abs().max(1.0) {
            target_iter.next();
            if contains_time(&ctl.snapshot_times, spec.time) {
                snapshots.push(state.clone());
            }
            continue;
        }
        let raw = advective_dt(&state, ctl);
        if raw < ctl.dt_min {
            return Err(MonitorViolation {
                kind: MonitorKind::DtUnderflow,
                time: spec.time,
                value: raw,
                limit: ctl.dt_min,
            }
            .into());
        }
        let mut dt = raw.min(ctl.dt_max);
        let landing = dt >= remaining * (1.0 - 1e-10);
        if landing {
            dt = remaining;
        }
        if stepper.as_ref().map_or(true, |s| s.dt() != dt) {
            stepper = Some(Stepper::new(spec.grid(), params, dt));
        }
        spec = stepper.as_ref().expect("built above").advance(&spec);
        if landing {
            spec.time = target;
        }
        steps += 1;
        state = spec.to_state();
        let rec = DiagnosticsRecord::with_spectra(&state, &spec, params);

        let v = viscous(&rec);
        dissipated += 0.5 * dt * (prev_viscous + v);
        prev_viscous = v;
        let budget = e0 + source_rate * (spec.time - t_start);
        check_monitors(&rec, monitors, budget, dissipated)?;
        records.push(rec);

        if params.kappa == 0.0 {
            window.push(state.clone());
            if window.len() > 3 {
                window.remove(0);
            }
            if window.len() == 3 {
                let mid = records.len() - 2;
                records[mid].determinant_residual =
                    crate::diagnostics::determinant_residual(&window, params).ok();
            }
        }
    }

    Ok(Trajectory {
        records,
        snapshots,
        final_state: state,
        steps,
        output_every: ctl.output_every,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::StressField;
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

    fn uniform_relaxation(g: &Grid, c0: f64, rho0: f64) -> SimState {
        let s = StressField::new(
            ScalarField::zeros(g),
            ScalarField::zeros(g),
            ScalarField::constant(g, c0),
        )
        .unwrap();
        SimState::new(0.0, VectorField::zeros(g), s, ScalarField::constant(g, rho0)).unwrap()
    }

    fn taylor_green(g: &Grid) -> SimState {
        let u = VectorField::new(
            ScalarField::from_fn(g, |x, y| x.sin() * y.cos()),
            ScalarField::from_fn(g, |x, y| -x.cos() * y.sin()),
        )
        .unwrap();
        SimState::new(0.0, u, StressField::zeros(g), ScalarField::zeros(g)).unwrap()
    }

    /// Smooth, positive, generic state with all couplings active.
    fn smooth(g: &Grid) -> SimState {
        let psi = ScalarField::from_fn(g, |x, y| {
            0.3 * (x + 0.2).sin() * (2.0 * y).cos() + 0.2 * (x - y).cos()
        });
        let u = crate::spectral::perp_grad(&psi.spectrum()).to_field();
        let a = ScalarField::from_fn(g, |x, y| 0.2 * (x + y).sin());
        let b = ScalarField::from_fn(g, |x, y| 0.1 * (x - 2.0 * y).cos());
        let c = ScalarField::from_fn(g, |x, y| 2.0 + 0.3 * x.cos() * y.sin());
        let rho = ScalarField::from_fn(g, |x, y| 1.0 + 0.2 * (2.0 * x).sin() + 0.1 * y.cos());
        SimState::new(0.0, u, StressField::new(a, b, c).unwrap(), rho).unwrap()
    }

    #[test]
    fn step_control_validation() {
        assert!(StepControl::new(0.5, 1e-6, 1e-2, 1.0, 10).is_ok());
        assert!(StepControl::new(0.0, 1e-6, 1e-2, 1.0, 10).is_err());
        assert!(StepControl::new(1.5, 1e-6, 1e-2, 1.0, 10).is_err());
        assert!(StepControl::new(0.5, 1e-2, 1e-3, 1.0, 10).is_err());
        assert!(StepControl::new(0.5, 1e-6, 1e-2, 1.0, 0).is_err());
    }

    #[test]
    fn dt_examples() {
        let p = params();
        let ctl = StepControl::new(0.5, 1e-8, 0.1, 1.0, 1).unwrap();
        let g = grid(64);
        assert_eq!(compute_dt(&equilibrium(&g, 1.0), &p, &ctl), 0.1);

        // |u|_inf = 1 for Taylor-Green
        let ctl = StepControl::new(0.5, 1e-8, 1.0, 1.0, 1).unwrap();
        let dt = compute_dt(&taylor_green(&g), &p, &ctl);
        assert!((dt - PI / 64.0).abs() < 1e-14);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let g = grid(16);
        let p = params();
        let s0 = equilibrium(&g, 1.3);
        let s1 = step(&s0, 0.05, &p).unwrap();
        assert!((s1.time - 0.05).abs() < 1e-15);
        assert!(s1.stress.c.zip_map(&s0.stress.c, |x, y| x - y).max_abs() < 1e-13);
        assert!(s1.stress.a.max_abs() < 1e-13 && s1.u.max_magnitude() < 1e-13);
        assert!(s1.rho.zip_map(&s0.rho, |x, y| x - y).max_abs() < 1e-13);
    }

    #[test]
    fn uniform_relaxation_matches_ode() {
        let g = grid(8);
        let p = PhysParams::new(0.01, 0.01, 1.7, 1.0).unwrap();
        let (c0, r0) = (5.0, 0.4);
        let ctl = StepControl::fixed(1e-2, 2.0).unwrap();
        let traj = run(&uniform_relaxation(&g, c0, r0), &p, &ctl, &Monitors::default()).unwrap();
        let t = traj.final_state.time;
        assert!((t - 2.0).abs() < 1e-12);
        let exact = 2.0 * r0 + (c0 - 2.0 * r0) * (-2.0 * p.k * t).exp();
        let c = traj.final_state.stress.c.mean();
        assert!(((c - exact) / exact).abs() < 1e-12);
    }

    #[test]
    fn taylor_green_energy_decay() {
        let g = grid(32);
        let p = params();
        let ctl = StepControl::new(0.5, 1e-6, 0.02, 1.0, 10).unwrap();
        let traj = run(&taylor_green(&g), &p, &ctl, &Monitors::default()).unwrap();
        let e0 = traj.records[0].energy;
        let e1 = traj.records.last().unwrap().energy;
        let exact = e0 * (-4.0 * p.nu).exp();
        assert!(((e1 - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn step_is_third_order() {
        let g = grid(16);
        let p = PhysParams::new(0.05, 0.05, 1.0, 1.0).unwrap();
        let s0 = smooth(&g);
        let evolve = |dt: f64| {
            let mut q = s0.spectra();
            let steps = (0.4 / dt).round() as usize;
            for _ in 0..steps {
                q = advance(&q, dt, &p);
            }
            q.to_state()
        };
        let reference = evolve(0.4 / 640.0);
        let err = |s: &SimState| {
            s.stress.c.sub(&reference.stress.c).l2_norm()
                + s.u.x.sub(&reference.u.x).l2_norm()
                + s.rho.sub(&reference.rho).l2_norm()
        };
        let e: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|&dt| err(&evolve(dt))).collect();
        let order1 = (e[0] / e[1]).log2();
        let order2 = (e[1] / e[2]).log2();
        assert!(order1 > 2.5 && order2 > 2.5, "orders {order1} {order2}");
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let g = grid(16);
        let p = params();
        let mut ctl = StepControl::new(0.5, 1e-6, 0.03, 0.2, 1).unwrap();
        ctl.snapshot_times = vec![0.0, 0.05, 0.2];
        let traj = run(&smooth(&g), &p, &ctl, &Monitors::default()).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 3);
        assert!((times[1] - 0.05).abs() < 1e-14 && (times[2] - 0.2).abs() < 1e-14);
        assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn inadmissible_input_is_rejected() {
        let g = grid(8);
        let s = StressField::new(
            ScalarField::constant(&g, 3.0),
            ScalarField::constant(&g, 4.0),
            ScalarField::constant(&g, 9.9),
        )
        .unwrap();
        let st = SimState::new(0.0, VectorField::zeros(&g), s, ScalarField::constant(&g, 1.0))
            .unwrap();
        assert!(matches!(step(&st, 0.01, &params()), Err(Error::NotAdmissible(_))));
        let ctl = StepControl::fixed(0.01, 0.1).unwrap();
        match run(&st, &params(), &ctl, &Monitors::default()) {
            Err(Error::Monitor(v)) => assert_eq!(v.kind, MonitorKind::Positivity),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ceiling_aborts_run() {
        let g = grid(8);
        let monitors = Monitors {
            c_ceiling: 1.0,
            ..Monitors::default()
        };
        let ctl = StepControl::fixed(0.01, 0.1).unwrap();
        match run(&equilibrium(&g, 1.0), &params(), &ctl, &monitors) {
            Err(Error::Monitor(v)) => {
                assert_eq!(v.kind, MonitorKind::Overflow);
                assert!(v.kind.is_numerical());
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
