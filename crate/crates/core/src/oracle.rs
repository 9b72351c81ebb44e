//! Numerical integration of `i dU/dt = H(t) U`, `U(0) = 𝕀`, as an independent
//! check on the closed-form propagators.
//!
//! The full 2×2 matrix is propagated and never re-unitarized; the unitarity and
//! determinant defects of the result are diagnostics.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ermakov::{ermakov_residual, mu_propagator, ErmakovSolution};
use crate::factorization::{hamiltonian_params, DrivingField, Factors, OscillatorSolution};
use crate::families::{Family, FamilyKind, FamilyParams};
use crate::numerics;
use crate::su2::{build_hamiltonian, ComplexMat2, HamiltonianParams, QubitState};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fixed-step 4th-order Runge–Kutta with step `max_step`.
    Rk4,
    /// Embedded Dormand–Prince 5(4) with local error control.
    DormandPrince,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub t_max: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub initial_step: Option<f64>,
    pub method: Method,
}

pub const DEFAULT_TOL: f64 = 1e-10;

impl IntegrationConfig {
    /// Adaptive integration with the default tolerances.
    pub fn new(t_max: f64) -> Self {
        Self {
            t_max,
            abs_tol: DEFAULT_TOL,
            rel_tol: DEFAULT_TOL,
            max_step: t_max,
            initial_step: None,
            method: Method::DormandPrince,
        }
    }

    pub fn fixed_step(t_max: f64, step: f64) -> Self {
        Self { max_step: step, method: Method::Rk4, ..Self::new(t_max) }
    }

    /// Defaults for a family: initial step `τ/1000` with `τ = 2π/max(Ω₀, Ω₁, |Δ|, 1)`.
    ///
    /// The global error grows roughly like `(t_max/τ)·tol`, so on windows longer
    /// than ten τ the tolerance is lowered as `1e-9·τ/t_max` (not below 1e-13).
    pub fn for_family(family: &dyn Family, t_max: f64) -> Self {
        Self::scaled(characteristic_time(family.params()), t_max)
    }

    /// The same defaults for the field synthesized from `sol`, with
    /// `τ = 2π/max(Ω₀, Ω(0), |Δ|, 1)`.
    pub fn for_solution(sol: &ErmakovSolution, level_splitting: f64, t_max: f64) -> Self {
        let rate = sol.omega0().max(sol.omega_sq(0.0).max(0.0).sqrt()).max(level_splitting.abs()).max(1.0);
        Self::scaled(TAU / rate, t_max)
    }

    fn scaled(tau: f64, t_max: f64) -> Self {
        let tol = DEFAULT_TOL.min(1e-9 * tau / t_max).max(1e-13);
        Self { initial_step: Some(tau / 1000.0), abs_tol: tol, rel_tol: tol, ..Self::new(t_max) }
    }

    pub fn validate(&self) -> Result<()> {
        let tol_ok = |x: f64| x > 0.0 && x <= 1e-3;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Parameter(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !tol_ok(self.abs_tol) || !tol_ok(self.rel_tol) {
            return Err(Error::Parameter(format!(
                "tolerances must lie in (0, 1e-3], got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Parameter(format!("max_step must be positive, got {}", self.max_step)));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(Error::Parameter(format!("initial step must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// `2π/max(Ω₀, Ω₁, |Δ|, 1)`.
pub fn characteristic_time(params: &FamilyParams) -> f64 {
    let rate = params.omega0().max(params.omega1.unwrap_or(0.0)).max(params.level_splitting.abs()).max(1.0);
    TAU / rate
}

/// Propagators sampled at the requested times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub propagators: Vec<ComplexMat2>,
    /// Accepted steps.
    pub steps: usize,
    /// Rejected adaptive steps.
    pub rejected: usize,
}

impl Trajectory {
    pub fn max_unitarity_defect(&self) -> f64 {
        self.propagators.iter().map(ComplexMat2::unitarity_defect).fold(0.0, f64::max)
    }

    pub fn max_determinant_defect(&self) -> f64 {
        self.propagators.iter().map(|u| (u.det() - 1.0).norm()).fold(0.0, f64::max)
    }
}

/// `n` equally spaced times on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| if k + 1 == n { t_max } else { t_max * k as f64 / (n - 1) as f64 }).collect(),
    }
}

fn rhs(params: &HamiltonianParams, t: f64, u: &ComplexMat2) -> Result<ComplexMat2> {
    Ok((build_hamiltonian(params, t)? * *u).scale(-I))
}

fn axpy(u: &ComplexMat2, terms: &[(f64, &ComplexMat2)]) -> ComplexMat2 {
    let mut out = *u;
    for (c, k) in terms {
        out = out + k.scale(C64::new(*c, 0.0));
    }
    out
}

fn rk4_step(params: &HamiltonianParams, t: f64, h: f64, u: &ComplexMat2) -> Result<ComplexMat2> {
    let k1 = rhs(params, t, u)?;
    let k2 = rhs(params, t + 0.5 * h, &axpy(u, &[(0.5 * h, &k1)]))?;
    let k3 = rhs(params, t + 0.5 * h, &axpy(u, &[(0.5 * h, &k2)]))?;
    let k4 = rhs(params, t + h, &axpy(u, &[(h, &k3)]))?;
    Ok(axpy(u, &[(h / 6.0, &k1), (h / 3.0, &k2), (h / 3.0, &k3), (h / 6.0, &k4)]))
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct DpStep {
    u: ComplexMat2,
    k7: ComplexMat2,
    err: f64,
}

fn dp_step(
    params: &HamiltonianParams,
    t: f64,
    h: f64,
    u: &ComplexMat2,
    k1: &ComplexMat2,
    atol: f64,
    rtol: f64,
) -> Result<DpStep> {
    let k2 = rhs(params, t + C2 * h, &axpy(u, &[(h * A21, k1)]))?;
    let k3 = rhs(params, t + C3 * h, &axpy(u, &[(h * A31, k1), (h * A32, &k2)]))?;
    let k4 = rhs(params, t + C4 * h, &axpy(u, &[(h * A41, k1), (h * A42, &k2), (h * A43, &k3)]))?;
    let k5 = rhs(params, t + C5 * h, &axpy(u, &[(h * A51, k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]))?;
    let k6 = rhs(
        params,
        t + h,
        &axpy(u, &[(h * A61, k1), (h * A62, &k2), (h * A63, &k3), (h * A64, &k4), (h * A65, &k5)]),
    )?;
    let next = axpy(u, &[(h * B1, k1), (h * B3, &k3), (h * B4, &k4), (h * B5, &k5), (h * B6, &k6)]);
    let k7 = rhs(params, t + h, &next)?;
    let delta = axpy(
        &ComplexMat2::zeros(),
        &[(h * E1, k1), (h * E3, &k3), (h * E4, &k4), (h * E5, &k5), (h * E6, &k6), (h * E7, &k7)],
    );
    let mut err = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let scale = atol + rtol * u.get(i, j).norm().max(next.get(i, j).norm());
            err = err.max(delta.get(i, j).norm() / scale);
        }
    }
    Ok(DpStep { u: next, k7, err })
}

/// Integrates `i dU/dt = H(t)U` from `U(0) = 𝕀` and samples `U` at `samples`
/// (ascending, within `[0, t_max]`). Steps are clipped to land on every sample.
pub fn integrate_propagator(
    params: &HamiltonianParams,
    config: &IntegrationConfig,
    samples: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    if samples.iter().any(|t| !(0.0..=config.t_max).contains(t)) || samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("samples must be ascending and lie in [0, t_max]".into()));
    }
    match config.method {
        Method::Rk4 => integrate_rk4(params, config, samples),
        Method::DormandPrince => integrate_dp(params, config, samples),
    }
}

fn integrate_rk4(params: &HamiltonianParams, config: &IntegrationConfig, samples: &[f64]) -> Result<Trajectory> {
    let mut u = ComplexMat2::identity();
    let mut t = 0.0;
    let mut steps = 0;
    let mut out = Vec::with_capacity(samples.len());
    for &target in samples {
        let span = target - t;
        if span > 0.0 {
            let n = (span / config.max_step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for k in 0..n {
                u = rk4_step(params, t + k as f64 * h, h, &u)?;
            }
            steps += n;
            t = target;
        }
        if !u.is_finite() {
            return Err(Error::NonFinite { what: "propagator", t });
        }
        out.push(u);
    }
    Ok(Trajectory { times: samples.to_vec(), propagators: out, steps, rejected: 0 })
}

fn integrate_dp(params: &HamiltonianParams, config: &IntegrationConfig, samples: &[f64]) -> Result<Trajectory> {
    const SAFETY: f64 = 0.9;
    const MIN_FACTOR: f64 = 0.2;
    const MAX_FACTOR: f64 = 5.0;

    let mut u = ComplexMat2::identity();
    let mut t = 0.0;
    let mut k1 = rhs(params, t, &u)?;
    let mut h = config.initial_step.unwrap_or(config.t_max / 100.0).min(config.max_step);
    let (mut steps, mut rejected) = (0, 0);
    let mut out = Vec::with_capacity(samples.len());
    for &target in samples {
        while t < target {
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !clipped {
                return Err(Error::Stiffness { t });
            }
            let trial = dp_step(params, t, step, &u, &k1, config.abs_tol, config.rel_tol)?;
            if !trial.err.is_finite() {
                return Err(Error::NonFinite { what: "propagator", t });
            }
            let factor = if trial.err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * trial.err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            if trial.err <= 1.0 {
                t = if clipped { target } else { t + step };
                u = trial.u;
                k1 = trial.k7;
                steps += 1;
                // a clipped step says nothing about the step size the error allows
                if !clipped || factor < 1.0 {
                    h = (step * factor).min(config.max_step);
                }
            } else {
                rejected += 1;
                h = step * factor.min(1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::Stiffness { t });
                }
            }
        }
        out.push(u);
    }
    Ok(Trajectory { times: samples.to_vec(), propagators: out, steps, rejected })
}

/// Pass/fail limits for [`verify_family`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub propagator: f64,
    pub unitarity: f64,
    pub ermakov: f64,
    pub schrodinger: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { propagator: 1e-8, unitarity: 1e-10, ermakov: 1e-8, schrodinger: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: String,
    /// `max ‖U†U − 𝕀‖` of the closed-form propagator.
    pub max_unitarity_defect: f64,
    /// `max |det U − 1|` of the closed-form propagator.
    pub max_determinant_defect: f64,
    /// `max_ij |U_closed − U_numeric|`.
    pub max_propagator_error: f64,
    /// `max |μ'' + Ω²μ − Ω₀²/μ³| / max(1, Ω²μ + Ω₀²/μ³)` with μ'' from finite
    /// differences of μ'. Absolute whenever the terms are of order one or less.
    pub max_ermakov_residual: f64,
    /// `max ‖i dU/dt − HU‖` with dU/dt from finite differences of the closed form.
    pub max_schrodinger_residual: f64,
    /// Same quantities for the numerically integrated propagator.
    pub oracle_unitarity_defect: f64,
    pub grid: Vec<f64>,
    pub thresholds: Thresholds,
    pub pass: bool,
}

/// `max_ij |i dU/dt − H U|` at `t`, dU/dt by extrapolated central differences.
pub fn schrodinger_residual<U>(propagator: U, params: &HamiltonianParams, t: f64, h0: f64) -> Result<f64>
where
    U: Fn(f64) -> Result<ComplexMat2>,
{
    let u = propagator(t)?;
    let hu = build_hamiltonian(params, t)? * u;
    // all four entries are differenced on the same stencil
    let cache = RefCell::new(HashMap::new());
    let eval = |s: f64| -> ComplexMat2 {
        *cache.borrow_mut().entry(s.to_bits()).or_insert_with(|| {
            propagator(s).unwrap_or_else(|_| ComplexMat2::identity().scale(C64::new(f64::NAN, f64::NAN)))
        })
    };
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            let d = numerics::derivative(|s| eval(s).get(i, j), t, h0);
            worst = worst.max((I * d - hu.get(i, j)).norm());
        }
    }
    if worst.is_nan() {
        return Err(Error::NonFinite { what: "Schrödinger residual", t });
    }
    Ok(worst)
}

/// Closed-form quantities compared with the integrator by [`verify_closed_form`].
pub struct ClosedForm<'a> {
    pub label: &'a str,
    pub hamiltonian: HamiltonianParams,
    pub propagator: &'a dyn Fn(f64) -> Result<ComplexMat2>,
    pub mu: &'a dyn Fn(f64) -> f64,
    pub mu_prime: &'a dyn Fn(f64) -> f64,
    pub omega_sq: &'a dyn Fn(f64) -> f64,
    pub omega0: f64,
    /// Starting step of the finite-difference checks.
    pub step: f64,
}

/// Compares a closed-form propagator with the numerical solution on `grid`
/// and collects the residual maxima.
pub fn verify_closed_form(
    model: &ClosedForm<'_>,
    config: &IntegrationConfig,
    thresholds: &Thresholds,
    grid: &[f64],
) -> Result<VerificationReport> {
    let trajectory = integrate_propagator(&model.hamiltonian, config, grid)?;
    let mut report = VerificationReport {
        family: model.label.to_owned(),
        max_unitarity_defect: 0.0,
        max_determinant_defect: 0.0,
        max_propagator_error: 0.0,
        max_ermakov_residual: 0.0,
        max_schrodinger_residual: 0.0,
        oracle_unitarity_defect: trajectory.max_unitarity_defect(),
        grid: grid.to_vec(),
        thresholds: *thresholds,
        pass: false,
    };
    for (&t, numeric) in grid.iter().zip(&trajectory.propagators) {
        let u = (model.propagator)(t)?;
        report.max_propagator_error = report.max_propagator_error.max(u.max_abs_diff(numeric));
        report.max_unitarity_defect = report.max_unitarity_defect.max(u.unitarity_defect());
        report.max_determinant_defect = report.max_determinant_defect.max((u.det() - 1.0).norm());
        let omega_sq = (model.omega_sq)(t);
        let residual = ermakov_residual(model.mu, model.mu_prime, omega_sq, model.omega0, t, model.step);
        let mu = (model.mu)(t);
        let magnitude = omega_sq * mu + model.omega0 * model.omega0 / (mu * mu * mu);
        report.max_ermakov_residual = report.max_ermakov_residual.max(residual / magnitude.max(1.0));
        let schrodinger = schrodinger_residual(model.propagator, &model.hamiltonian, t, model.step)?;
        report.max_schrodinger_residual = report.max_schrodinger_residual.max(schrodinger);
    }
    let finite = [
        report.max_propagator_error,
        report.max_unitarity_defect,
        report.max_ermakov_residual,
        report.max_schrodinger_residual,
    ]
    .iter()
    .all(|x| x.is_finite());
    report.pass = finite
        && report.max_propagator_error <= thresholds.propagator
        && report.max_unitarity_defect <= thresholds.unitarity
        && report.max_ermakov_residual <= thresholds.ermakov
        && report.max_schrodinger_residual <= thresholds.schrodinger;
    Ok(report)
}

/// [`verify_closed_form`] for one of the closed-form families.
pub fn verify_family(
    family: &dyn Family,
    config: &IntegrationConfig,
    thresholds: &Thresholds,
    grid: &[f64],
) -> Result<VerificationReport> {
    let omega_sq = family.prescribed_omega_sq();
    let model = ClosedForm {
        label: family.kind().name(),
        hamiltonian: family.hamiltonian(),
        propagator: &|t| family.propagator(t),
        mu: &|t| family.mu(t),
        mu_prime: &|t| family.mu_prime(t),
        omega_sq: &|_| omega_sq,
        omega0: family.omega0(),
        step: 0.1 * DrivingField::time_scale(family),
    };
    verify_closed_form(&model, config, thresholds, grid)
}

/// [`verify_closed_form`] for the field synthesized from `sol`, using the
/// disentangled μ-form propagator.
pub fn verify_solution(
    sol: &ErmakovSolution,
    level_splitting: f64,
    config: &IntegrationConfig,
    thresholds: &Thresholds,
    grid: &[f64],
) -> Result<VerificationReport> {
    let field: Arc<dyn DrivingField> = Arc::new(sol.field(level_splitting));
    let osc = sol.oscillator();
    let model = ClosedForm {
        label: "custom-pinney",
        hamiltonian: hamiltonian_params(field),
        propagator: &|t| mu_propagator(sol, &osc, level_splitting, t),
        mu: &|t| sol.mu(t),
        mu_prime: &|t| sol.mu_prime(t),
        omega_sq: &|t| sol.omega_sq(t),
        omega0: sol.omega0(),
        step: 0.1 * sol.time_scale(),
    };
    verify_closed_form(&model, config, thresholds, grid)
}

/// Wraps a family and multiplies its closed-form α by `factor`; everything else,
/// including the Hamiltonian handed to the integrator, is left untouched.
#[derive(Clone)]
pub struct AlphaFault {
    inner: Arc<dyn Family>,
    factor: C64,
}

impl AlphaFault {
    pub fn new(inner: Arc<dyn Family>, factor: f64) -> Self {
        Self { inner, factor: C64::new(factor, 0.0) }
    }
}

impl DrivingField for AlphaFault {
    fn r(&self, t: f64) -> C64 {
        self.inner.r(t)
    }
    fn level_splitting(&self) -> f64 {
        self.inner.level_splitting()
    }
    fn r_derivatives(&self, t: f64) -> Option<(C64, C64)> {
        self.inner.r_derivatives(t)
    }
    fn time_scale(&self) -> f64 {
        DrivingField::time_scale(self.inner.as_ref())
    }
    fn r0(&self) -> C64 {
        self.inner.r0()
    }
    fn log_r_prime0(&self) -> C64 {
        self.inner.log_r_prime0()
    }
}

impl OscillatorSolution for AlphaFault {
    fn phi(&self, t: f64) -> C64 {
        self.inner.phi(t)
    }
    fn phi_prime(&self, t: f64) -> C64 {
        self.inner.phi_prime(t)
    }
    fn companion(&self, t: f64) -> Option<(C64, C64)> {
        self.inner.companion(t)
    }
    fn oscillation_scale(&self) -> f64 {
        self.inner.oscillation_scale()
    }
}

impl Family for AlphaFault {
    fn kind(&self) -> FamilyKind {
        self.inner.kind()
    }
    fn params(&self) -> &FamilyParams {
        self.inner.params()
    }
    fn prescribed_omega_sq(&self) -> f64 {
        self.inner.prescribed_omega_sq()
    }
    fn mu_sq_derivatives(&self, t: f64) -> (f64, f64, f64) {
        self.inner.mu_sq_derivatives(t)
    }
    fn eta(&self, t: f64) -> f64 {
        self.inner.eta(t)
    }
    fn factors(&self, t: f64) -> Result<Factors> {
        let f = self.inner.factors(t)?;
        Ok(Factors::new(f.alpha * self.factor, f.delta_f, f.beta))
    }
    fn state(&self, t: f64) -> QubitState {
        self.inner.state(t)
    }
    fn population_inversion(&self, t: f64) -> f64 {
        self.inner.population_inversion(t)
    }
    fn characteristic_period(&self) -> f64 {
        self.inner.characteristic_period()
    }
    fn ermakov(&self) -> Result<ErmakovSolution> {
        self.inner.ermakov()
    }
    fn hamiltonian(&self) -> HamiltonianParams {
        self.inner.hamiltonian()
    }
}
