//! Direct approach: from a driving field `R(t)` and a solution φ of the
//! parametric oscillator to the factorizing functions `(α, Δf, β)`.
//!
//! `R(t) = −i e^{−iΔt} V̄(t)` is the driving field in rotating form. Given φ with
//! `φ'' + Ω² φ = 0`, `φ(0) = 1` and `φ'(0) = −½ R'(0)/R(0)`,
//!
//! ```text
//! α(t)  = e^{−iΔt}/R · [φ'/φ + ½ R'/R]
//! Δf(t) = −2 ln φ − ln(R/R₀) − iΔt
//! β(t)  = R₀ ∫₀ᵗ ds/φ²
//! ```
//!
//! Both logarithms are continued along the time axis, never taken on the
//! principal branch pointwise: a 2πi slip in `ln(R/R₀)` flips the sign of
//! `e^{±Δf/2}`.

use std::cell::Cell;
use std::sync::Arc;

use crate::numerics::{self, UnwrappedLog};
use crate::su2::{compose_propagator, ComplexMat2, HamiltonianParams};
use crate::{Error, Result, C64};

/// `|R|` below which the field is treated as vanishing.
pub const FIELD_FLOOR: f64 = 1e-14;
/// `|φ|` (and closed-form denominators) below which the factorization is singular.
pub const PHI_FLOOR: f64 = 1e-12;
/// Absolute tolerance of the β quadrature.
pub const BETA_TOL: f64 = 1e-12;

const I: C64 = C64::new(0.0, 1.0);

/// `V(t) = −i e^{−iΔt} R̄(t)`; the same map sends V back to R.
pub fn coupling_from_drive(level_splitting: f64, r: C64, t: f64) -> C64 {
    -I * C64::from_polar(1.0, -level_splitting * t) * r.conj()
}

/// A driving field in rotating form.
pub trait DrivingField: Send + Sync {
    fn r(&self, t: f64) -> C64;

    fn level_splitting(&self) -> f64;

    /// Analytic `(R'(t), R''(t))`, when the field knows them.
    fn r_derivatives(&self, _t: f64) -> Option<(C64, C64)> {
        None
    }

    /// Shortest time scale on which `R` varies. Sets finite-difference steps
    /// and the resolution of phase unwrapping.
    fn time_scale(&self) -> f64 {
        1.0
    }

    fn r0(&self) -> C64 {
        self.r(0.0)
    }

    /// `R'(0)/R(0)`.
    fn log_r_prime0(&self) -> C64 {
        r_prime(self, 0.0) / self.r0()
    }

    fn v(&self, t: f64) -> C64 {
        coupling_from_drive(self.level_splitting(), self.r(t), t)
    }
}

fn r_prime<F: DrivingField + ?Sized>(field: &F, t: f64) -> C64 {
    match field.r_derivatives(t) {
        Some((d1, _)) => d1,
        None => numerics::derivative(|s| field.r(s), t, 0.1 * field.time_scale()),
    }
}

/// Hamiltonian parameters driven by `field`.
pub fn hamiltonian_params(field: Arc<dyn DrivingField>) -> HamiltonianParams {
    let delta = field.level_splitting();
    HamiltonianParams::new(delta, move |t| field.v(t))
}

type ScalarFn = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
type PairFn = Arc<dyn Fn(f64) -> (C64, C64) + Send + Sync>;

/// A driving field given by closures.
#[derive(Clone)]
pub struct FieldSpec {
    r: ScalarFn,
    derivatives: Option<PairFn>,
    level_splitting: f64,
    time_scale: f64,
}

impl FieldSpec {
    pub fn new<R>(level_splitting: f64, r: R) -> Self
    where
        R: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self { r: Arc::new(r), derivatives: None, level_splitting, time_scale: 1.0 }
    }

    pub fn with_derivatives<D>(mut self, d: D) -> Self
    where
        D: Fn(f64) -> (C64, C64) + Send + Sync + 'static,
    {
        self.derivatives = Some(Arc::new(d));
        self
    }

    pub fn with_time_scale(mut self, time_scale: f64) -> Self {
        self.time_scale = time_scale;
        self
    }
}

impl DrivingField for FieldSpec {
    fn r(&self, t: f64) -> C64 {
        (self.r)(t)
    }
    fn level_splitting(&self) -> f64 {
        self.level_splitting
    }
    fn r_derivatives(&self, t: f64) -> Option<(C64, C64)> {
        self.derivatives.as_ref().map(|d| d(t))
    }
    fn time_scale(&self) -> f64 {
        self.time_scale
    }
}

/// How [`frequency_from_field`] obtains `R'` and `R''`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Use the field's analytic derivatives, falling back to finite differences.
    Analytic,
    /// Always use extrapolated central differences.
    FiniteDifference,
}

/// `Ω²(t) = −¼ [(ln R)']² + ½ (ln R)'' + |R|²`.
pub fn frequency_from_field<F>(field: &F, t: f64, mode: DerivativeMode) -> Result<C64>
where
    F: DrivingField + ?Sized,
{
    let r = field.r(t);
    if !(r.norm() >= FIELD_FLOOR) {
        return Err(Error::SingularField { t, magnitude: r.norm() });
    }
    let analytic = match mode {
        DerivativeMode::Analytic => field.r_derivatives(t),
        DerivativeMode::FiniteDifference => None,
    };
    let (d1, d2) = analytic.unwrap_or_else(|| {
        let h0 = 0.1 * field.time_scale();
        let f = |s: f64| field.r(s);
        (numerics::derivative(f, t, h0), numerics::second_derivative(f, t, h0))
    });
    let gamma = d1 / r;
    let gamma_prime = d2 / r - gamma * gamma;
    let omega_sq = -gamma * gamma * 0.25 + gamma_prime * 0.5 + r.norm_sqr();
    if !(omega_sq.re.is_finite() && omega_sq.im.is_finite()) {
        return Err(Error::NonFinite { what: "Ω²", t });
    }
    Ok(omega_sq)
}

/// A solution φ of `φ'' + Ω² φ = 0` with `φ(0) = 1`.
pub trait OscillatorSolution: Send + Sync {
    fn phi(&self, t: f64) -> C64;

    fn phi_prime(&self, t: f64) -> C64;

    /// `W = φ ∫₀ᵗ ds/φ²` and `W'`, when known in closed form. `W` is the
    /// companion solution with `W(0) = 0`, `W'(0) = 1`; it stays regular at
    /// zeros of φ.
    fn companion(&self, _t: f64) -> Option<(C64, C64)> {
        None
    }

    /// Shortest time scale on which φ varies.
    fn oscillation_scale(&self) -> f64 {
        1.0
    }
}

/// An oscillator solution given by closures for φ and φ'.
#[derive(Clone)]
pub struct OscillatorFn {
    phi: ScalarFn,
    phi_prime: ScalarFn,
    time_scale: f64,
}

impl OscillatorFn {
    pub fn new<P, D>(phi: P, phi_prime: D) -> Self
    where
        P: Fn(f64) -> C64 + Send + Sync + 'static,
        D: Fn(f64) -> C64 + Send + Sync + 'static,
    {
        Self { phi: Arc::new(phi), phi_prime: Arc::new(phi_prime), time_scale: 1.0 }
    }

    pub fn with_time_scale(mut self, time_scale: f64) -> Self {
        self.time_scale = time_scale;
        self
    }
}

impl OscillatorSolution for OscillatorFn {
    fn phi(&self, t: f64) -> C64 {
        (self.phi)(t)
    }
    fn phi_prime(&self, t: f64) -> C64 {
        (self.phi_prime)(t)
    }
    fn oscillation_scale(&self) -> f64 {
        self.time_scale
    }
}

/// Values of the factorizing functions at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factors {
    pub alpha: C64,
    pub delta_f: C64,
    pub beta: C64,
}

impl Factors {
    pub const ZERO: Factors = Factors {
        alpha: C64::new(0.0, 0.0),
        delta_f: C64::new(0.0, 0.0),
        beta: C64::new(0.0, 0.0),
    };

    pub fn new(alpha: C64, delta_f: C64, beta: C64) -> Self {
        Self { alpha, delta_f, beta }
    }

    /// The disentangled propagator; see [`compose_propagator`].
    pub fn propagator(&self) -> Result<ComplexMat2> {
        compose_propagator(self.alpha, self.delta_f, self.beta)
    }

    /// Largest componentwise distance to `other`.
    pub fn max_abs_diff(&self, other: &Factors) -> f64 {
        (self.alpha - other.alpha)
            .norm()
            .max((self.delta_f - other.delta_f).norm())
            .max((self.beta - other.beta).norm())
    }

    pub fn is_finite(&self) -> bool {
        [self.alpha, self.delta_f, self.beta].iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// `β(t) = R₀ ∫₀ᵗ ds/φ²(s)` by adaptive quadrature.
pub fn beta_quadrature<P>(phi: &P, r0: C64, t: f64) -> Result<C64>
where
    P: OscillatorSolution + ?Sized,
{
    beta_increment(phi, r0, 0.0, t)
}

fn beta_increment<P>(phi: &P, r0: C64, a: f64, b: f64) -> Result<C64>
where
    P: OscillatorSolution + ?Sized,
{
    let pole = Cell::new(None);
    let integrand = |s: f64| {
        let p = phi.phi(s);
        if p.norm() < PHI_FLOOR && pole.get().is_none() {
            pole.set(Some(s));
        }
        (p * p).inv()
    };
    let value = numerics::integrate(integrand, a, b, BETA_TOL, 0.0);
    if let Some(s) = pole.get() {
        return Err(Error::Singularity { t: s, what: "φ vanishes in the β integrand" });
    }
    match value {
        Ok(v) => Ok(r0 * v),
        Err(Error::Quadrature { a, .. }) => Err(Error::Singularity { t: a, what: "β quadrature diverges" }),
        Err(e) => Err(e),
    }
}

/// Checks `φ(0) = 1` and the `α(0) = 0` pairing `φ'(0) + ½ R'(0)/R(0) = 0`.
pub fn check_pairing<F, P>(field: &F, phi: &P) -> Result<()>
where
    F: DrivingField + ?Sized,
    P: OscillatorSolution + ?Sized,
{
    let r0 = field.r0();
    if !(r0.norm() >= FIELD_FLOOR) {
        return Err(Error::SingularField { t: 0.0, magnitude: r0.norm() });
    }
    let phi0 = phi.phi(0.0);
    if (phi0 - 1.0).norm() > 1e-12 {
        return Err(Error::InvalidPairing(format!("φ(0) = {phi0}, expected 1")));
    }
    let gamma0 = field.log_r_prime0();
    let residual = (phi.phi_prime(0.0) + gamma0 * 0.5).norm();
    if residual > 1e-6 * (1.0 + gamma0.norm()) {
        return Err(Error::InvalidPairing(format!(
            "φ'(0) + ½R'(0)/R(0) = {residual:e}, expected 0"
        )));
    }
    Ok(())
}

/// Direct factorization at a single time. See [`factorize_direct_grid`].
pub fn factorize_direct<F, P>(field: &F, phi: &P, t: f64) -> Result<Factors>
where
    F: DrivingField + ?Sized,
    P: OscillatorSolution + ?Sized,
{
    factorize_direct_grid(field, phi, &[t]).map(|v| v[0])
}

/// Direct factorization on an ascending grid of non-negative times.
///
/// Both logarithms are unwrapped incrementally along the grid and β is
/// accumulated panel by panel, so a grid costs about as much as its last point.
pub fn factorize_direct_grid<F, P>(field: &F, phi: &P, times: &[f64]) -> Result<Vec<Factors>>
where
    F: DrivingField + ?Sized,
    P: OscillatorSolution + ?Sized,
{
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("evaluation times must be finite, non-negative and ascending".into()));
    }
    check_pairing(field, phi)?;
    let delta = field.level_splitting();
    let r0 = field.r0();

    let mut log_phi = UnwrappedLog::new(|s| phi.phi(s), PHI_FLOOR, 0.125 * phi.oscillation_scale())
        .map_err(|t| Error::Singularity { t, what: "φ vanishes" })?;
    let mut log_r = UnwrappedLog::new(|s| field.r(s), FIELD_FLOOR, 0.125 * field.time_scale())
        .map_err(|t| Error::SingularField { t, magnitude: field.r(t).norm() })?;

    let mut out = Vec::with_capacity(times.len());
    let mut beta = C64::new(0.0, 0.0);
    let mut last = 0.0;
    for &t in times {
        if t == 0.0 {
            out.push(Factors::ZERO);
            continue;
        }
        let ln_phi = log_phi.advance(t).map_err(|s| Error::Singularity { t: s, what: "φ vanishes" })?;
        let ln_r = log_r
            .advance(t)
            .map_err(|s| Error::SingularField { t: s, magnitude: field.r(s).norm() })?;
        beta += beta_increment(phi, r0, last, t)?;
        last = t;

        let r = field.r(t);
        let p = phi.phi(t);
        let gamma = r_prime(field, t) / r;
        let alpha = C64::from_polar(1.0, -delta * t) / r * (phi.phi_prime(t) / p + gamma * 0.5);
        let delta_f = -ln_phi * 2.0 - ln_r - I * delta * t;
        let factors = Factors::new(alpha, delta_f, beta);
        if !factors.is_finite() {
            return Err(Error::NonFinite { what: "factorizing functions", t });
        }
        out.push(factors);
    }
    Ok(out)
}
