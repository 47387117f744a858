//! A priori bounds on energy, stress, vorticity and density norms, and
//! their comparison with observed trajectories.
//!
//! Only the energy bound is free of unspecified constants, so it is the
//! only hard pass/fail row. The others carry a generic constant `C`
//! (default 1) and are reported as observed/bound ratios.

use std::fmt;

use super::units::{Dim, Quantity};
use super::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::fields::{norms, PhysParams, SimState};
use crate::integrate::Trajectory;

/// Relative quadrature tolerance of the hard energy gate.
pub const ENERGY_GATE_TOL: f64 = 1e-6;

/// Data-dependent inputs of the bound formulas.
#[derive(Clone, Copy, Debug)]
pub struct LedgerInputs<Q> {
    pub u_l2_sq: Q,
    pub c_integral: Q,
    pub rho_l1: Q,
    pub sigma_l2_sq: Q,
    pub rho_l2_sq: Q,
    pub omega_l2_sq: Q,
    pub grad_sigma_l2_sq: Q,
    pub grad_omega_l2_sq: Q,
    pub rho_w12: Q,
    pub nu: Q,
    pub kappa: Q,
    pub k: Q,
    pub big_k: Q,
    pub horizon: Q,
    pub constant: Q,
}

impl LedgerInputs<f64> {
    pub fn from_state(initial: &SimState, params: &PhysParams, horizon: f64, constant: f64) -> Self {
        let r = norms(initial);
        let sq = |name: &str| r.get(name).unwrap_or(0.0).powi(2);
        LedgerInputs {
            u_l2_sq: sq("u_L2"),
            c_integral: initial.stress.c.integral(),
            rho_l1: r.get("rho_L1").unwrap_or(0.0),
            sigma_l2_sq: sq("sigma_L2"),
            rho_l2_sq: sq("rho_L2"),
            omega_l2_sq: sq("omega_L2"),
            grad_sigma_l2_sq: sq("grad_sigma_L2"),
            grad_omega_l2_sq: sq("grad_omega_L2"),
            rho_w12: r.get("rho_W12").unwrap_or(0.0),
            nu: params.nu,
            kappa: params.kappa,
            k: params.k,
            big_k: params.big_k,
            horizon,
            constant,
        }
    }
}

impl LedgerInputs<Dim> {
    /// Physical units of every input: velocity cm/sec, stress and density
    /// dimensionless, integrals over area cm^2.
    pub fn units() -> Self {
        LedgerInputs {
            u_l2_sq: Dim::new(4, -2),
            c_integral: Dim::new(2, 0),
            rho_l1: Dim::new(2, 0),
            sigma_l2_sq: Dim::new(2, 0),
            rho_l2_sq: Dim::new(2, 0),
            omega_l2_sq: Dim::new(2, -2),
            grad_sigma_l2_sq: Dim::NONE,
            grad_omega_l2_sq: Dim::new(0, -2),
            rho_w12: Dim::new(1, 0),
            nu: Dim::new(2, -1),
            kappa: Dim::new(2, -1),
            k: Dim::new(0, -1),
            big_k: Dim::new(2, -2),
            horizon: Dim::new(0, 1),
            constant: Dim::NONE,
        }
    }
}

/// The seven ledger quantities, plus the exponents of the exponential
/// factors (dimensionless when the formulas are consistent).
#[derive(Clone, Copy, Debug)]
pub struct LedgerValues<Q> {
    pub r0: Q,
    pub r1: Q,
    pub r2: Q,
    pub b: Q,
    pub r3: Q,
    pub r4: Q,
    pub r5: Q,
    pub energy_exponent: Q,
    pub vorticity_exponent: Q,
    pub density_exponent: Q,
}

pub fn evaluate<Q: Quantity>(i: &LedgerInputs<Q>) -> LedgerValues<Q> {
    let c = i.constant;
    let four = Q::scalar(4.0);
    let r0 = i.u_l2_sq + i.big_k * i.c_integral + four * i.k * i.big_k * i.horizon * i.rho_l1;
    let x = r0 / (i.nu * i.kappa);

    let bracket = i.sigma_l2_sq + i.k * i.horizon * i.rho_l2_sq;
    let r1 = Q::scaled_exp(c * bracket, x);
    let r2 = Q::scaled_exp(c * i.big_k * i.big_k / (i.kappa * i.nu) * bracket, x) + i.omega_l2_sq;
    let b = c / (i.kappa * (i.kappa * i.nu).pow_quarters(2)) * r1 * r2;
    let r3 = Q::scaled_exp(
        c * (i.grad_sigma_l2_sq + b + i.k * i.k * i.horizon / i.kappa * i.rho_l2_sq),
        x,
    );
    let y = c * i.nu.pow_quarters(-6) * (i.horizon * r0 * r2).pow_quarters(2);
    let r4 = Q::scaled_exp(
        c * (i.grad_omega_l2_sq + i.big_k * i.big_k / (i.nu * i.kappa) * r3),
        y,
    );
    let z = i.nu.pow_quarters(-1)
        * r2.pow_quarters(1)
        * i.horizon.pow_quarters(3)
        * r4.pow_quarters(1);
    let r5 = Q::scaled_exp(i.rho_w12, z);
    LedgerValues {
        r0,
        r1,
        r2,
        b,
        r3,
        r4,
        r5,
        energy_exponent: x,
        vorticity_exponent: y,
        density_exponent: z,
    }
}

/// A priori bounds for one initial state and horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundLedger {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub b: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    /// Value used for every generic constant.
    pub constant: f64,
    /// Names of entries that overflowed to `+inf`.
    pub overflowed: Vec<&'static str>,
    pub params: PhysParams,
    pub horizon: f64,
}

impl BoundLedger {
    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("R0", self.r0),
            ("R1", self.r1),
            ("R2", self.r2),
            ("B", self.b),
            ("R3", self.r3),
            ("R4", self.r4),
            ("R5", self.r5),
        ]
    }

    pub fn has_overflow(&self) -> bool {
        !self.overflowed.is_empty()
    }
}

impl fmt::Display for BoundLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let units = evaluate(&LedgerInputs::<Dim>::units());
        let dims = [units.r0, units.r1, units.r2, units.b, units.r3, units.r4, units.r5];
        writeln!(f, "a priori bounds, T = {}, C = {}", self.horizon, self.constant)?;
        for ((name, v), d) in self.entries().iter().zip(dims) {
            let unit = if name == &"R5" { format!("{d} as the L2 part of rho W12") } else { d.to_string() };
            writeln!(f, "  {name:<3} = {v:<24.16e} [{unit}]")?;
        }
        if self.has_overflow() {
            writeln!(f, "  overflow (+inf): {}", self.overflowed.join(", "))?;
        }
        Ok(())
    }
}

/// Bounds with every generic constant set to 1.
pub fn apriori_ledger(initial: &SimState, params: &PhysParams, horizon: f64) -> Result<BoundLedger> {
    apriori_ledger_with_constant(initial, params, horizon, 1.0)
}

pub fn apriori_ledger_with_constant(
    initial: &SimState,
    params: &PhysParams,
    horizon: f64,
    constant: f64,
) -> Result<BoundLedger> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParams(format!("horizon must be positive, got {horizon}")));
    }
    if !(constant > 0.0 && constant.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "generic constant must be positive, got {constant}"
        )));
    }
    if params.kappa <= 0.0 {
        return Err(Error::InvalidParams("the bounds require kappa > 0".into()));
    }
    if !initial.is_admissible(crate::fields::ADMISSIBLE_TOL) {
        return Err(Error::NotAdmissible("initial stress is not positive".into()));
    }
    let v = evaluate(&LedgerInputs::from_state(initial, params, horizon, constant));
    let mut ledger = BoundLedger {
        r0: v.r0,
        r1: v.r1,
        r2: v.r2,
        b: v.b,
        r3: v.r3,
        r4: v.r4,
        r5: v.r5,
        constant,
        overflowed: Vec::new(),
        params: *params,
        horizon,
    };
    for (name, val) in ledger.entries() {
        if val.is_infinite() || val.is_nan() {
            ledger.overflowed.push(name);
        }
    }
    for slot in [
        &mut ledger.r0,
        &mut ledger.r1,
        &mut ledger.r2,
        &mut ledger.b,
        &mut ledger.r3,
        &mut ledger.r4,
        &mut ledger.r5,
    ] {
        if slot.is_nan() {
            *slot = f64::INFINITY;
        }
    }
    Ok(ledger)
}

/// Observed norm histories feeding [`bound_check_series`]. Optional
/// columns are those a time-series file does not carry.
#[derive(Clone, Debug, Default)]
pub struct BoundSeries {
    pub times: Vec<f64>,
    /// `int (|u|^2 + K c)`
    pub energy: Vec<f64>,
    pub grad_u_l2: Vec<f64>,
    pub sigma_l2: Vec<f64>,
    pub grad_sigma_l2: Vec<f64>,
    pub omega_l2: Vec<f64>,
    pub grad_omega_l2: Option<Vec<f64>>,
    pub lap_sigma_l2: Option<Vec<f64>>,
    pub lap_omega_l2: Option<Vec<f64>>,
    pub rho_w12: Option<Vec<f64>>,
}

impl BoundSeries {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DiagnosticsRecord>) -> Self {
        let mut s = BoundSeries {
            grad_omega_l2: Some(Vec::new()),
            lap_sigma_l2: Some(Vec::new()),
            lap_omega_l2: Some(Vec::new()),
            rho_w12: Some(Vec::new()),
            ..Default::default()
        };
        for r in records {
            let g = |name: &str| r.norms.get(name).unwrap_or(f64::NAN);
            s.times.push(r.time);
            s.energy.push(r.energy);
            s.grad_u_l2.push(g("grad_u_L2"));
            s.sigma_l2.push(g("sigma_L2"));
            s.grad_sigma_l2.push(g("grad_sigma_L2"));
            s.omega_l2.push(g("omega_L2"));
            for (col, name) in [
                (&mut s.grad_omega_l2, "grad_omega_L2"),
                (&mut s.lap_sigma_l2, "lap_sigma_L2"),
                (&mut s.lap_omega_l2, "lap_omega_L2"),
                (&mut s.rho_w12, "rho_W12"),
            ] {
                col.as_mut().unwrap().push(g(name));
            }
        }
        s
    }
}

/// Trapezoid rule for `int f dt` over the sample times.
pub fn trapezoid(times: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    times
        .windows(2)
        .enumerate()
        .map(|(i, w)| 0.5 * (w[1] - w[0]) * (f(i) + f(i + 1)))
        .sum()
}

fn sup(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// One inequality: an observed left-hand side against its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub name: &'static str,
    /// `None` when the input lacks the needed norms.
    pub observed: Option<f64>,
    pub bound: f64,
    /// Constant-free rows are pass/fail gates; the rest are informational.
    pub hard: bool,
}

impl BoundRow {
    pub fn ratio(&self) -> Option<f64> {
        self.observed.map(|o| {
            if self.bound == 0.0 && o == 0.0 {
                0.0
            } else {
                o / self.bound
            }
        })
    }

    /// Pass/fail for hard rows; `None` for informational rows.
    pub fn passed(&self) -> Option<bool> {
        if !self.hard {
            return None;
        }
        self.observed
            .map(|o| o <= self.bound * (1.0 + ENERGY_GATE_TOL) + ENERGY_GATE_TOL * f64::MIN_POSITIVE)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    /// True unless a hard row failed or could not be evaluated.
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .filter(|r| r.hard)
            .all(|r| r.passed() == Some(true))
    }

    pub fn row(&self, name: &str) -> Option<&BoundRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<20} {:>24} {:>24} {:>12}  status", "inequality", "observed", "bound", "ratio")?;
        for r in &self.rows {
            let obs = r.observed.map_or("n/a".to_string(), |o| format!("{o:.16e}"));
            let ratio = r.ratio().map_or("n/a".to_string(), |x| format!("{x:.4e}"));
            let status = match (r.hard, r.passed()) {
                (true, Some(true)) => "PASS",
                (true, Some(false)) => "FAIL",
                (true, None) => "MISSING",
                (false, _) => "info",
            };
            writeln!(f, "{:<20} {:>24} {:>24.16e} {:>12}  {status}", r.name, obs, r.bound, ratio)?;
        }
        Ok(())
    }
}

/// Compares a completed trajectory with the ledger.
pub fn bound_check(traj: &Trajectory, ledger: &BoundLedger) -> BoundReport {
    bound_check_series(&BoundSeries::from_records(&traj.records), ledger)
}

/// The six inequalities, left-hand sides from `s`:
/// energy, stress L2, vorticity L2, stress gradient, vorticity gradient,
/// density W12.
pub fn bound_check_series(s: &BoundSeries, ledger: &BoundLedger) -> BoundReport {
    let p = &ledger.params;
    let t = &s.times;
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let sup_plus_integral = |sup_of: &[f64], coef: f64, integrand: &[f64]| {
        sup(&sq(sup_of)) + coef * trapezoid(t, |i| integrand[i] * integrand[i])
    };
    let energy = sup(&s.energy) + 2.0 * p.nu * trapezoid(t, |i| s.grad_u_l2[i].powi(2));
    let stress = sup_plus_integral(&s.sigma_l2, p.kappa, &s.grad_sigma_l2);
    let vort = s
        .grad_omega_l2
        .as_ref()
        .map(|g| sup_plus_integral(&s.omega_l2, p.nu, g));
    let stress_grad = s
        .lap_sigma_l2
        .as_ref()
        .map(|l| sup_plus_integral(&s.grad_sigma_l2, p.kappa, l));
    let vort_grad = match (&s.grad_omega_l2, &s.lap_omega_l2) {
        (Some(g), Some(l)) => Some(sup_plus_integral(g, p.nu, l)),
        _ => None,
    };
    let density = s.rho_w12.as_ref().map(|r| sup(r));
    let row = |name, observed: Option<f64>, bound, hard| BoundRow {
        name,
        observed: observed.filter(|o| !t.is_empty() && !o.is_nan()),
        bound,
        hard,
    };
    BoundReport {
        rows: vec![
            row("energy", Some(energy), ledger.r0, true),
            row("stress_l2", Some(stress), ledger.r1, false),
            row("vorticity_l2", vort, ledger.r2, false),
            row("stress_gradient", stress_grad, ledger.r3, false),
            row("vorticity_gradient", vort_grad, ledger.r4, false),
            row("density_w12", density, ledger.r5, false),
        ],
    }
}
