//! Inverse approach: synthesize driving fields from a prescribed real Ω(t).
//!
//! Writing `(ln R)' = γ₁ + iγ₂` with `γ₁ = −(ln μ²)'` and `γ₂ = λ/μ²` turns the
//! field → Ω² map into the Ermakov equation
//!
//! ```text
//! μ'' + Ω² μ = Ω₀²/μ³,    Ω₀² = |R₀|² + λ²/4,
//! ```
//!
//! and every positive solution μ gives an exactly solvable field
//! `R(t) = (R₀/μ²) exp[iλ ∫₀ᵗ ds/μ²]`. Solutions μ come from a pair of
//! oscillator solutions through the Pinney formula.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use crate::factorization::{
    beta_quadrature, DrivingField, Factors, OscillatorSolution, FIELD_FLOOR, PHI_FLOOR,
};
use crate::numerics::{self, UnwrappedLog};
use crate::su2::{compose_propagator, ComplexMat2};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Phase-integral quadrature tolerance.
pub const PHASE_TOL: f64 = 1e-12;
/// Angular tolerance of the `mod 2π` closure test.
pub const PERIODICITY_TOL: f64 = 1e-9;
/// Default search bound for the period multiplier.
pub const DEFAULT_MAX_P: u32 = 64;

/// Two real solutions of `φ'' + Ω²(t) φ = 0` with Wronskian `φ₁φ₂' − φ₁'φ₂ = 1`.
pub trait OscillatorBasis: Send + Sync {
    fn omega_sq(&self, t: f64) -> f64;

    /// `(φ₁, φ₁')`.
    fn first(&self, t: f64) -> (f64, f64);

    /// `(φ₂, φ₂')`.
    fn second(&self, t: f64) -> (f64, f64);

    /// Period of every quadratic form in `(φ₁, φ₂)`, if the basis has one.
    fn mu_period(&self) -> Option<f64> {
        None
    }

    /// Shortest time scale of the basis, `∞` when there is none.
    fn time_scale(&self) -> f64;

    /// True when `(φ₁, φ₂)` changes sign over `mu_period()`, or, for a basis
    /// without a period, when the ratio `φ₂/φ₁` is monotone between two limits
    /// crossed at most once. Either way `∫ds/μ²` follows from a phase angle
    /// without quadrature.
    fn closed_phase(&self) -> bool {
        false
    }
}

/// `Ω = Ω₁`: `φ₁ = cos Ω₁t`, `φ₂ = sin(Ω₁t)/Ω₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicBasis {
    pub omega1: f64,
}

impl HarmonicBasis {
    pub fn new(omega1: f64) -> Result<Self> {
        if !(omega1 > 0.0 && omega1.is_finite()) {
            return Err(Error::Parameter(format!("Ω₁ must be positive, got {omega1}")));
        }
        Ok(Self { omega1 })
    }
}

impl OscillatorBasis for HarmonicBasis {
    fn omega_sq(&self, _t: f64) -> f64 {
        self.omega1 * self.omega1
    }
    fn first(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega1 * t).sin_cos();
        (c, -self.omega1 * s)
    }
    fn second(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.omega1 * t).sin_cos();
        (s / self.omega1, c)
    }
    fn mu_period(&self) -> Option<f64> {
        Some(PI / self.omega1)
    }
    fn time_scale(&self) -> f64 {
        1.0 / self.omega1
    }
    fn closed_phase(&self) -> bool {
        true
    }
}

/// `Ω = 0`: `φ₁ = t`, `φ₂ = t ∫dt/t² = −1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FreeBasis;

impl OscillatorBasis for FreeBasis {
    fn omega_sq(&self, _t: f64) -> f64 {
        0.0
    }
    fn first(&self, t: f64) -> (f64, f64) {
        (t, 1.0)
    }
    fn second(&self, _t: f64) -> (f64, f64) {
        (-1.0, 0.0)
    }
    fn time_scale(&self) -> f64 {
        f64::INFINITY
    }
    fn closed_phase(&self) -> bool {
        true
    }
}

/// Ermakov solution from the Pinney formula
/// `μ² = Ω₀²φ₁²/c₁ + c₁φ₁²[c₂ + ∫dt/φ₁²]²`.
///
/// With `φ₁ ∫dt/φ₁² = φ₂` this is evaluated as `Ω₀²φ₁²/c₁ + c₁(c₂φ₁ + φ₂)²`,
/// which stays regular at the zeros of φ₁.
#[derive(Clone)]
pub struct PinneyMu {
    basis: Arc<dyn OscillatorBasis>,
    omega0: f64,
    c1: f64,
    c2: f64,
}

impl fmt::Debug for PinneyMu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PinneyMu")
            .field("omega0", &self.omega0)
            .field("c1", &self.c1)
            .field("c2", &self.c2)
            .finish_non_exhaustive()
    }
}

/// Builds the Pinney solution for the given basis and constants.
pub fn pinney_mu(basis: Arc<dyn OscillatorBasis>, omega0: f64, c1: f64, c2: f64) -> Result<PinneyMu> {
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::Parameter(format!("Pinney constant c₁ must be positive, got {c1}")));
    }
    if !c2.is_finite() {
        return Err(Error::Parameter(format!("Pinney constant c₂ must be finite, got {c2}")));
    }
    // μ² is a sum of squares of two independent solutions scaled by Ω₀ and √c₁;
    // it has zeros exactly when Ω₀ = 0.
    if !(omega0 > 0.0 && omega0.is_finite()) {
        return Err(Error::Synthesis(format!("μ² vanishes somewhere for Ω₀ = {omega0}")));
    }
    let (a, da) = basis.first(0.0);
    let (b, db) = basis.second(0.0);
    let wronskian = a * db - da * b;
    if (wronskian - 1.0).abs() > 1e-12 {
        return Err(Error::Parameter(format!("basis Wronskian is {wronskian}, expected 1")));
    }
    Ok(PinneyMu { basis, omega0, c1, c2 })
}

impl PinneyMu {
    /// Pinney constants giving `μ(0) = 1` and `μ'(0) = mu0_prime`.
    ///
    /// In the basis normalized at the origin (`u₁(0) = 1, u₁'(0) = 0`,
    /// `u₂(0) = 0, u₂'(0) = 1`) that solution is
    /// `μ² = u₁² + 2μ₀' u₁u₂ + (Ω₀² + μ₀'²) u₂²`; re-expanding it in `(φ₁, φ₂)`
    /// and matching `c₁φ₂² + 2c₁c₂φ₁φ₂ + …` gives the constants.
    pub fn normalized_constants(basis: &dyn OscillatorBasis, omega0: f64, mu0_prime: f64) -> (f64, f64) {
        let (a, da) = basis.first(0.0);
        let (b, db) = basis.second(0.0);
        let k = omega0 * omega0 + mu0_prime * mu0_prime;
        let cross = -da * db + mu0_prime * (a * db + da * b) - k * a * b;
        let c1 = da * da - 2.0 * mu0_prime * a * da + k * a * a;
        (c1, cross / c1)
    }

    pub fn normalized(basis: Arc<dyn OscillatorBasis>, omega0: f64, mu0_prime: f64) -> Result<Self> {
        let (c1, c2) = Self::normalized_constants(basis.as_ref(), omega0, mu0_prime);
        pinney_mu(basis, omega0, c1, c2)
    }

    pub fn basis(&self) -> &Arc<dyn OscillatorBasis> {
        &self.basis
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn constants(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    pub fn mu_sq(&self, t: f64) -> f64 {
        let (p1, _) = self.basis.first(t);
        let (p2, _) = self.basis.second(t);
        let w = self.c2 * p1 + p2;
        self.omega0 * self.omega0 * p1 * p1 / self.c1 + self.c1 * w * w
    }

    pub fn mu(&self, t: f64) -> f64 {
        self.mu_sq(t).sqrt()
    }

    pub fn mu_prime(&self, t: f64) -> f64 {
        let (p1, d1) = self.basis.first(t);
        let (p2, d2) = self.basis.second(t);
        let w = self.c2 * p1 + p2;
        let dw = self.c2 * d1 + d2;
        let half_d_mu_sq = self.omega0 * self.omega0 * p1 * d1 / self.c1 + self.c1 * w * dw;
        half_d_mu_sq / self.mu(t)
    }

    /// `μ''` from the Ermakov equation itself.
    pub fn mu_second(&self, t: f64) -> f64 {
        let mu = self.mu(t);
        self.omega0 * self.omega0 / (mu * mu * mu) - self.basis.omega_sq(t) * mu
    }

    /// `∫₀ᵗ ds/μ²` from the phase ψ of `z = Ω₀φ₁ + i(Bφ₁ + Cφ₂)`, where
    /// `μ² = Aφ₁² + 2Bφ₁φ₂ + Cφ₂²`. Then `|z|² = Cμ²` and `ψ' = Ω₀/μ²`, and
    /// each μ-period advances ψ by exactly π. `None` for bases without
    /// [`OscillatorBasis::closed_phase`].
    pub fn phase_integral(&self, t: f64) -> Option<f64> {
        if !self.basis.closed_phase() {
            return None;
        }
        let (b, c) = (self.c1 * self.c2, self.c1);
        let z = |s: f64| {
            let (p1, _) = self.basis.first(s);
            let (p2, _) = self.basis.second(s);
            C64::new(self.omega0 * p1, b * p1 + c * p2)
        };
        let (turns, start) = match self.basis.mu_period() {
            Some(tau) => {
                let n = (t / tau).floor();
                (n, n * tau)
            }
            None => (0.0, 0.0),
        };
        let sign = if turns.rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 };
        // the advance from `start` to t lies in [0, π), or in (−π, 0] for t < 0
        // without a period
        let mut d = (z(t) / (z(0.0) * sign)).arg();
        if t >= start && d < -0.5 * PI {
            d += TAU;
        } else if t < start && d > 0.5 * PI {
            d -= TAU;
        }
        Some((turns * PI + d) / self.omega0)
    }
}

/// `(μ₀', λ)` from the field's initial data, with `μ₀ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub mu0_prime: f64,
    pub lambda: f64,
}

/// `μ₀'/μ₀ = −½ Re[R₀'/R₀]`, `λ/μ₀ = Im[R₀'/R₀]`, `μ₀ = 1`.
pub fn map_initial_data(r0: C64, r0_prime: C64) -> Result<InitialData> {
    if !(r0.norm() >= FIELD_FLOOR) {
        return Err(Error::Parameter("R₀ must be non-zero".into()));
    }
    let ratio = r0_prime / r0;
    Ok(InitialData { mu0_prime: -0.5 * ratio.re, lambda: ratio.im })
}

/// Real and imaginary parts of `(d/dt) ln R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSplit {
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Least period multiplier `p` with `R(t + pτ) = R(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicitySpec {
    pub tau: f64,
    pub p: u32,
    pub tau_p: f64,
}

type PhaseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A solution μ of the Ermakov equation together with the field data it was
/// built for: `R₀`, λ and the generalized Rabi-like frequency Ω₀.
#[derive(Clone)]
pub struct ErmakovSolution {
    pinney: PinneyMu,
    r0: C64,
    lambda: f64,
    mu0_prime: f64,
    phase: Option<PhaseFn>,
    period: Option<f64>,
    time_scale: f64,
}

impl fmt::Debug for ErmakovSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ErmakovSolution")
            .field("pinney", &self.pinney)
            .field("r0", &self.r0)
            .field("lambda", &self.lambda)
            .field("period", &self.period)
            .finish_non_exhaustive()
    }
}

impl ErmakovSolution {
    /// Assembles a solution and checks `Ω₀² = |R₀|² + λ²/4`, `μ(0) = 1` and
    /// `μ'(0) = μ₀'`.
    pub fn new(pinney: PinneyMu, r0: C64, lambda: f64, mu0_prime: f64) -> Result<Self> {
        let omega0 = pinney.omega0;
        let expected = r0.norm_sqr() + 0.25 * lambda * lambda;
        if (omega0 * omega0 - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(Error::Parameter(format!(
                "Ω₀² = {} does not equal |R₀|² + λ²/4 = {expected}",
                omega0 * omega0
            )));
        }
        let mu0 = pinney.mu(0.0);
        let dmu0 = pinney.mu_prime(0.0);
        if (mu0 - 1.0).abs() > 1e-10 || (dmu0 - mu0_prime).abs() > 1e-10 * (1.0 + mu0_prime.abs()) {
            return Err(Error::Synthesis(format!(
                "Pinney constants give μ(0) = {mu0}, μ'(0) = {dmu0}; expected 1 and {mu0_prime}"
            )));
        }
        let period = pinney.basis.mu_period();
        let time_scale = Self::estimate_time_scale(&pinney);
        Ok(Self { pinney, r0, lambda, mu0_prime, phase: None, period, time_scale })
    }

    /// General initial data `(R₀, R₀')` routed through [`map_initial_data`].
    /// `constants = None` selects the normalized Pinney constants.
    pub fn from_initial_data(
        basis: Arc<dyn OscillatorBasis>,
        r0: C64,
        r0_prime: C64,
        constants: Option<(f64, f64)>,
    ) -> Result<Self> {
        let InitialData { mu0_prime, lambda } = map_initial_data(r0, r0_prime)?;
        let omega0 = (r0.norm_sqr() + 0.25 * lambda * lambda).sqrt();
        let pinney = match constants {
            Some((c1, c2)) => pinney_mu(basis, omega0, c1, c2)?,
            None => PinneyMu::normalized(basis, omega0, mu0_prime)?,
        };
        Self::new(pinney, r0, lambda, mu0_prime)
    }

    /// The convention `R₀ = −iḡ`, `(ln R)'(0) = iδ`, so `λ = δ` and `μ₀' = 0`.
    pub fn standard(basis: Arc<dyn OscillatorBasis>, g: C64, detuning: f64) -> Result<Self> {
        let r0 = -I * g.conj();
        let omega0 = (g.norm_sqr() + 0.25 * detuning * detuning).sqrt();
        let pinney = PinneyMu::normalized(basis, omega0, 0.0)?;
        Self::new(pinney, r0, detuning, 0.0)
    }

    /// Replaces the phase quadrature by a closed form of `∫₀ᵗ ds/μ²`.
    pub fn with_phase_integral<F>(mut self, phase: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.phase = Some(Arc::new(phase));
        self
    }

    pub fn with_period(mut self, period: Option<f64>) -> Self {
        self.period = period;
        self
    }

    fn estimate_time_scale(pinney: &PinneyMu) -> f64 {
        let basis_scale = pinney.basis.time_scale();
        let base = basis_scale.min(1.0 / pinney.omega0);
        let window = 4.0 * if basis_scale.is_finite() { basis_scale.max(1.0 / pinney.omega0) } else { base };
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..=512 {
            let m = pinney.mu(window * k as f64 / 512.0);
            lo = lo.min(m);
            hi = hi.max(m);
        }
        base * (lo / hi).min(1.0)
    }

    pub fn pinney(&self) -> &PinneyMu {
        &self.pinney
    }
    pub fn r0(&self) -> C64 {
        self.r0
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn omega0(&self) -> f64 {
        self.pinney.omega0
    }
    pub fn mu0_prime(&self) -> f64 {
        self.mu0_prime
    }
    pub fn constants(&self) -> (f64, f64) {
        self.pinney.constants()
    }
    pub fn period(&self) -> Option<f64> {
        self.period
    }
    /// Shortest time scale of μ and of the synthesized field.
    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }
    pub fn omega_sq(&self, t: f64) -> f64 {
        self.pinney.basis.omega_sq(t)
    }
    pub fn mu(&self, t: f64) -> f64 {
        self.pinney.mu(t)
    }
    pub fn mu_sq(&self, t: f64) -> f64 {
        self.pinney.mu_sq(t)
    }
    pub fn mu_prime(&self, t: f64) -> f64 {
        self.pinney.mu_prime(t)
    }

    /// `∫₀ᵗ ds/μ²(s)`, closed form when available.
    pub fn phase_integral(&self, t: f64) -> Result<f64> {
        if let Some(f) = &self.phase {
            return Ok(f(t));
        }
        match self.pinney.phase_integral(t) {
            Some(eta) => Ok(eta),
            None => numerics::integrate_real(|s| 1.0 / self.pinney.mu_sq(s), 0.0, t, PHASE_TOL, 0.0)
                .map_err(|e| Error::Synthesis(format!("phase integral: {e}"))),
        }
    }

    /// `γ₁ = −(ln μ²)'`, `γ₂ = λ/μ²`.
    pub fn gamma(&self, t: f64) -> GammaSplit {
        GammaSplit { gamma1: -2.0 * self.mu_prime(t) / self.mu(t), gamma2: self.lambda / self.mu_sq(t) }
    }

    fn gamma_complex(&self, t: f64) -> C64 {
        let g = self.gamma(t);
        C64::new(g.gamma1, g.gamma2)
    }

    /// Field with level splitting Δ synthesized from this solution.
    pub fn field(&self, level_splitting: f64) -> SynthesizedField {
        SynthesizedField { sol: self.clone(), level_splitting }
    }

    /// The oscillator solution paired with the synthesized field:
    /// `φ(0) = 1`, `φ'(0) = −½ R₀'/R₀ = μ₀' − iλ/2`.
    pub fn oscillator(&self) -> BasisOscillator {
        let basis = self.pinney.basis.clone();
        let (a, da) = basis.first(0.0);
        let (b, db) = basis.second(0.0);
        let slope = C64::new(self.mu0_prime, -0.5 * self.lambda);
        BasisOscillator {
            basis,
            phi_coeffs: (db - slope * b, slope * a - da),
            companion_coeffs: (-b, a),
            scale: self.time_scale,
        }
    }
}

/// `R(t) = (R₀/μ²) exp[iλ ∫₀ᵗ ds/μ²]`.
pub fn synthesize_field(sol: &ErmakovSolution, t: f64) -> Result<C64> {
    let eta = sol.phase_integral(t)?;
    Ok(sol.r0 / sol.mu_sq(t) * C64::from_polar(1.0, sol.lambda * eta))
}

/// Driving field synthesized from an [`ErmakovSolution`].
#[derive(Debug, Clone)]
pub struct SynthesizedField {
    sol: ErmakovSolution,
    level_splitting: f64,
}

impl SynthesizedField {
    pub fn solution(&self) -> &ErmakovSolution {
        &self.sol
    }
}

impl DrivingField for SynthesizedField {
    fn r(&self, t: f64) -> C64 {
        synthesize_field(&self.sol, t).unwrap_or(C64::new(f64::NAN, f64::NAN))
    }

    fn level_splitting(&self) -> f64 {
        self.level_splitting
    }

    /// `R' = γR`, `R'' = (γ² + γ')R` with μ'' taken from the Ermakov equation.
    fn r_derivatives(&self, t: f64) -> Option<(C64, C64)> {
        let r = self.r(t);
        let mu = self.sol.mu(t);
        let dmu = self.sol.mu_prime(t);
        let ddmu = self.sol.pinney.mu_second(t);
        let gamma = self.sol.gamma_complex(t);
        let dgamma = C64::new(
            -2.0 * (ddmu / mu - dmu * dmu / (mu * mu)),
            -2.0 * self.sol.lambda * dmu / (mu * mu * mu),
        );
        Some((gamma * r, (gamma * gamma + dgamma) * r))
    }

    fn time_scale(&self) -> f64 {
        self.sol.time_scale
    }

    fn r0(&self) -> C64 {
        self.sol.r0
    }

    fn log_r_prime0(&self) -> C64 {
        self.sol.gamma_complex(0.0)
    }
}

/// φ and its companion `W = φ∫₀ᵗds/φ²` as combinations of the real basis.
#[derive(Clone)]
pub struct BasisOscillator {
    basis: Arc<dyn OscillatorBasis>,
    phi_coeffs: (C64, C64),
    companion_coeffs: (f64, f64),
    scale: f64,
}

impl fmt::Debug for BasisOscillator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisOscillator")
            .field("phi_coeffs", &self.phi_coeffs)
            .field("companion_coeffs", &self.companion_coeffs)
            .finish_non_exhaustive()
    }
}

impl OscillatorSolution for BasisOscillator {
    fn phi(&self, t: f64) -> C64 {
        let (x, y) = self.phi_coeffs;
        x * self.basis.first(t).0 + y * self.basis.second(t).0
    }
    fn phi_prime(&self, t: f64) -> C64 {
        let (x, y) = self.phi_coeffs;
        x * self.basis.first(t).1 + y * self.basis.second(t).1
    }
    fn companion(&self, t: f64) -> Option<(C64, C64)> {
        let (x, y) = self.companion_coeffs;
        let (p1, d1) = self.basis.first(t);
        let (p2, d2) = self.basis.second(t);
        Some((C64::new(x * p1 + y * p2, 0.0), C64::new(x * d1 + y * d2, 0.0)))
    }
    fn oscillation_scale(&self) -> f64 {
        self.scale
    }
}

/// μ-form factorization at a single time. See [`mu_factorization_grid`].
pub fn mu_factorization<P>(sol: &ErmakovSolution, phi: &P, level_splitting: f64, t: f64) -> Result<Factors>
where
    P: OscillatorSolution + ?Sized,
{
    mu_factorization_grid(sol, phi, level_splitting, &[t]).map(|v| v[0])
}

/// Factorizing functions written through μ:
///
/// ```text
/// α  = (μ²/R₀) e^{−iΔt − iλη} [φ'/φ − μ'/μ + iλ/(2μ²)]
/// β  = R₀ ∫₀ᵗ ds/φ²
/// Δf = ln(μ²/φ²) − iλη − iΔt,        η = ∫₀ᵗ ds/μ²
/// ```
///
/// `β` uses the companion solution `W` as `R₀W/φ` when φ provides it.
pub fn mu_factorization_grid<P>(
    sol: &ErmakovSolution,
    phi: &P,
    level_splitting: f64,
    times: &[f64],
) -> Result<Vec<Factors>>
where
    P: OscillatorSolution + ?Sized,
{
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter("evaluation times must be finite, non-negative and ascending".into()));
    }
    if !(sol.r0.norm() >= FIELD_FLOOR) {
        return Err(Error::SingularField { t: 0.0, magnitude: sol.r0.norm() });
    }
    let mut log_phi = UnwrappedLog::new(|s| phi.phi(s), PHI_FLOOR, 0.125 * phi.oscillation_scale())
        .map_err(|t| Error::Singularity { t, what: "φ vanishes" })?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let ln_phi = log_phi.advance(t).map_err(|s| Error::Singularity { t: s, what: "φ vanishes" })?;
        out.push(factors_at(sol, phi, level_splitting, t, ln_phi)?);
    }
    Ok(out)
}

fn factors_at<P>(sol: &ErmakovSolution, phi: &P, level_splitting: f64, t: f64, ln_phi: C64) -> Result<Factors>
where
    P: OscillatorSolution + ?Sized,
{
    let p = phi.phi(t);
    let mu_sq = sol.mu_sq(t);
    let mu = mu_sq.sqrt();
    let eta = sol.phase_integral(t)?;
    let theta = sol.lambda * eta + level_splitting * t;
    let bracket = phi.phi_prime(t) / p - sol.mu_prime(t) / mu + I * (0.5 * sol.lambda / mu_sq);
    let alpha = mu_sq / sol.r0 * C64::from_polar(1.0, -theta) * bracket;
    let beta = match phi.companion(t) {
        Some((w, _)) => sol.r0 * w / p,
        None => beta_quadrature(phi, sol.r0, t)?,
    };
    let delta_f = mu_sq.ln() - ln_phi * 2.0 - I * theta;
    let factors = Factors::new(alpha, delta_f, beta);
    if !factors.is_finite() {
        return Err(Error::NonFinite { what: "factorizing functions", t });
    }
    Ok(factors)
}

/// μ-form factors at a single time with `Im Δf` on the principal branch of
/// `ln φ`. Unlike [`mu_factorization`] this needs no continuation from `t = 0`,
/// so it also works past zeros of φ.
pub fn mu_factors_principal<P>(sol: &ErmakovSolution, phi: &P, level_splitting: f64, t: f64) -> Result<Factors>
where
    P: OscillatorSolution + ?Sized,
{
    if !(sol.r0.norm() >= FIELD_FLOOR) {
        return Err(Error::SingularField { t: 0.0, magnitude: sol.r0.norm() });
    }
    let p = phi.phi(t);
    if !(p.norm() >= PHI_FLOOR) {
        return Err(Error::Singularity { t, what: "φ vanishes" });
    }
    factors_at(sol, phi, level_splitting, t, (p / phi.phi(0.0)).ln())
}

/// Disentangled product of the μ-form factors at a single time.
///
/// Only `e^{±Δf/2}` enters the product and a `2πi` shift of `ln φ` leaves both
/// unchanged, so [`mu_factors_principal`] suffices.
pub fn mu_propagator<P>(sol: &ErmakovSolution, phi: &P, level_splitting: f64, t: f64) -> Result<ComplexMat2>
where
    P: OscillatorSolution + ?Sized,
{
    let f = mu_factors_principal(sol, phi, level_splitting, t)?;
    compose_propagator(f.alpha, f.delta_f, f.beta).map_err(|e| match e {
        Error::Range { value, .. } => Error::Range { t, value },
        other => other,
    })
}

/// Closed-form data from which the propagator is assembled without dividing by φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalData {
    pub phi: C64,
    pub phi_prime: C64,
    /// Companion `W = φ ∫₀ᵗ ds/φ²` and `W'`.
    pub w: C64,
    pub w_prime: C64,
    pub mu: f64,
    pub mu_prime: f64,
    pub lambda: f64,
    pub r0: C64,
    /// `θ = λη + Δt`.
    pub theta: f64,
}

/// Propagator in terms of φ and its companion W:
///
/// ```text
/// U₂₂ = φ e^{iθ/2}/μ              U₂₁ = R₀ W e^{iθ/2}/μ
/// U₁₂ = (μ/R₀)(φ' + γφ/2)e^{−iθ/2} U₁₁ = μ (W' + γW/2) e^{−iθ/2}
/// ```
///
/// with `γ = −2μ'/μ + iλ/μ²`. This equals the disentangled product wherever
/// that is defined and remains finite at zeros of φ.
pub fn fundamental_propagator(d: &FundamentalData) -> ComplexMat2 {
    let gamma = C64::new(-2.0 * d.mu_prime / d.mu, d.lambda / (d.mu * d.mu));
    let fwd = C64::from_polar(1.0, 0.5 * d.theta);
    let bwd = fwd.conj();
    let u22 = d.phi * fwd / d.mu;
    let u21 = d.r0 * d.w * fwd / d.mu;
    let u12 = if d.r0.norm() >= FIELD_FLOOR {
        (d.phi_prime + gamma * d.phi * 0.5) * bwd * d.mu / d.r0
    } else {
        C64::new(0.0, 0.0)
    };
    let u11 = (d.w_prime + gamma * d.w * 0.5) * bwd * d.mu;
    ComplexMat2::new(u11, u12, u21, u22)
}

/// Regular propagator of the synthesized field at time `t`.
pub fn propagator_from_solution(sol: &ErmakovSolution, level_splitting: f64, t: f64) -> Result<ComplexMat2> {
    let osc = sol.oscillator();
    let (w, w_prime) = osc.companion(t).expect("basis oscillators carry a companion");
    let eta = sol.phase_integral(t)?;
    Ok(fundamental_propagator(&FundamentalData {
        phi: osc.phi(t),
        phi_prime: osc.phi_prime(t),
        w,
        w_prime,
        mu: sol.mu(t),
        mu_prime: sol.mu_prime(t),
        lambda: sol.lambda,
        r0: sol.r0,
        theta: sol.lambda * eta + level_splitting * t,
    }))
}

/// Least `p ≤ max_p` with `p·λ·∫₀^τ ds/μ² ≡ 0 (mod 2π)`, when μ has a period τ.
pub fn check_periodicity(sol: &ErmakovSolution, max_p: u32) -> Result<Option<PeriodicitySpec>> {
    let Some(tau) = sol.period else {
        return Ok(None);
    };
    let advance = sol.lambda * sol.phase_integral(tau)?;
    for p in 1..=max_p {
        let x = (p as f64 * advance).rem_euclid(TAU);
        if x.min(TAU - x) < PERIODICITY_TOL {
            return Ok(Some(PeriodicitySpec { tau, p, tau_p: p as f64 * tau }));
        }
    }
    Ok(None)
}

/// `|μ'' + Ω²μ − Ω₀²/μ³|` with μ'' from extrapolated central differences of
/// the closed-form slope `mu_prime`.
pub fn ermakov_residual<M, D>(mu: M, mu_prime: D, omega_sq: f64, omega0: f64, t: f64, h0: f64) -> f64
where
    M: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let m = mu(t);
    let d2 = numerics::derivative(|s| C64::new(mu_prime(s), 0.0), t, h0).re;
    (d2 + omega_sq * m - omega0 * omega0 / (m * m * m)).abs()
}

impl ErmakovSolution {
    /// [`ermakov_residual`] of this solution's μ at `t`.
    pub fn residual(&self, t: f64) -> f64 {
        ermakov_residual(|s| self.mu(s), |s| self.mu_prime(s), self.omega_sq(t), self.omega0(), t, 0.1 * self.time_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{factorize_direct_grid, frequency_from_field, DerivativeMode};

    fn harmonic(omega1: f64) -> Arc<dyn OscillatorBasis> {
        Arc::new(HarmonicBasis::new(omega1).unwrap())
    }

    #[test]
    fn pinney_harmonic_seed() {
        // g = √5, δ = 4 → Ω₀ = 3; κ = 0.6
        let omega0 = 3.0;
        let omega1 = omega0 / 0.6;
        let mu = pinney_mu(harmonic(omega1), omega0, omega0 * omega0, 0.0).unwrap();
        for k in 0..100 {
            let t = k as f64 * 0.037;
            let (s, c) = (omega1 * t).sin_cos();
            assert!((mu.mu_sq(t) - (c * c + 0.36 * s * s)).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_phase_matches_quadrature() {
        let bases: [Arc<dyn OscillatorBasis>; 2] = [harmonic(1.7), Arc::new(FreeBasis)];
        for basis in bases {
            for (omega0, c1, c2) in [(0.8, 0.3, 1.9), (2.5, 4.0, -0.7), (1.1, 1.0, 0.0)] {
                let mu = pinney_mu(basis.clone(), omega0, c1, c2).unwrap();
                for k in -3..60 {
                    let t = 0.173 * k as f64;
                    let closed = mu.phase_integral(t).unwrap();
                    let quad = numerics::integrate_real(|s| 1.0 / mu.mu_sq(s), 0.0, t, 1e-14, 0.0).unwrap();
                    assert!((closed - quad).abs() < 1e-11 * (1.0 + quad.abs()), "t = {t}: {closed} vs {quad}");
                }
            }
        }
    }

    #[test]
    fn pinney_isotropic_is_constant() {
        let mu = pinney_mu(harmonic(2.0), 2.0, 4.0, 0.0).unwrap();
        for k in 0..50 {
            assert!((mu.mu(k as f64 * 0.1) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pinney_free_seed() {
        let omega0 = 1.3;
        let mu = pinney_mu(Arc::new(FreeBasis), omega0, 1.0, 0.0).unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.2;
            assert!((mu.mu_sq(t) - (omega0 * omega0 * t * t + 1.0)).abs() < 1e-12);
        }
        assert_eq!(PinneyMu::normalized_constants(&FreeBasis, omega0, 0.0), (1.0, 0.0));
    }

    #[test]
    fn pinney_rejects_bad_constants() {
        assert!(matches!(pinney_mu(harmonic(1.0), 1.0, 0.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(pinney_mu(harmonic(1.0), 1.0, -2.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(pinney_mu(harmonic(1.0), 0.0, 1.0, 0.0), Err(Error::Synthesis(_))));
    }

    #[test]
    fn unnormalized_constants_fail_the_check() {
        let pinney = pinney_mu(harmonic(2.0), 1.0, 3.0, 0.0).unwrap();
        let r0 = C64::new(0.0, -(1.0f64 - 0.25).sqrt());
        assert!(matches!(ErmakovSolution::new(pinney, r0, 1.0, 0.0), Err(Error::Synthesis(_))));
    }

    #[test]
    fn initial_data_mapping() {
        let g = 5f64.sqrt();
        let r0 = C64::new(0.0, -g);
        let d = map_initial_data(r0, r0 * I * 4.0).unwrap();
        assert_eq!(d, InitialData { mu0_prime: 0.0, lambda: 4.0 });
        let d = map_initial_data(C64::new(1.0, 0.0), C64::new(0.0, 0.0)).unwrap();
        assert_eq!(d, InitialData { mu0_prime: 0.0, lambda: 0.0 });
        let r0 = C64::new(0.3, -1.1);
        let d = map_initial_data(r0, r0 * C64::new(2.0, 3.0)).unwrap();
        assert!((d.mu0_prime + 1.0).abs() < 1e-15 && (d.lambda - 3.0).abs() < 1e-15);
        assert!(map_initial_data(C64::new(0.0, 0.0), C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn general_initial_data_normalizes() {
        let r0 = C64::new(0.7, -0.4);
        let r0_prime = r0 * C64::new(0.9, -1.7);
        let sol = ErmakovSolution::from_initial_data(harmonic(2.3), r0, r0_prime, None).unwrap();
        assert!((sol.mu(0.0) - 1.0).abs() < 1e-14);
        assert!((sol.mu_prime(0.0) + 0.45).abs() < 1e-12);
        assert!((sol.lambda() + 1.7).abs() < 1e-15);
        let field = sol.field(0.5);
        assert!((field.log_r_prime0() - C64::new(0.9, -1.7)).norm() < 1e-12);
        for k in 0..40 {
            let t = 0.05 + k as f64 * 0.11;
            assert!(sol.residual(t) < 1e-8, "t={t}: {}", sol.residual(t));
        }
    }

    #[test]
    fn circular_synthesis() {
        let (g, detuning) = (5f64.sqrt(), 4.0);
        let sol = ErmakovSolution::standard(harmonic(3.0), C64::new(g, 0.0), detuning).unwrap();
        for k in 0..30 {
            let t = k as f64 * 0.21;
            let r = synthesize_field(&sol, t).unwrap();
            let expected = C64::new(0.0, -g) * C64::from_polar(1.0, detuning * t);
            assert!((r - expected).norm() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn decaying_synthesis_has_arctan_phase() {
        let (g, detuning) = (C64::new(0.5, 0.0), 1.0);
        let omega0 = (0.25f64 + 0.25).sqrt();
        let sol = ErmakovSolution::standard(Arc::new(FreeBasis), g, detuning).unwrap();
        for k in 0..30 {
            let t = k as f64 * 0.7;
            let r = synthesize_field(&sol, t).unwrap();
            let expected = -I * g.conj() / (omega0 * omega0 * t * t + 1.0)
                * C64::from_polar(1.0, detuning / omega0 * (omega0 * t).atan());
            assert!((r - expected).norm() < 1e-11, "t={t}");
        }
    }

    #[test]
    fn log_derivative_identity_and_gamma_split() {
        let sol = ErmakovSolution::standard(harmonic(5.0), C64::new(5f64.sqrt(), 0.0), 4.0).unwrap();
        let field = sol.field(1.0);
        for k in 0..50 {
            let t = 0.013 + k as f64 * 0.047;
            let r = field.r(t);
            let d = numerics::derivative(|s| field.r(s), t, 0.1 * field.time_scale()) / r;
            let expected = C64::new(-2.0 * sol.mu_prime(t) / sol.mu(t), sol.lambda() / sol.mu_sq(t));
            assert!((d - expected).norm() < 1e-7, "t={t}");
            let g = sol.gamma(t);
            assert!((d.re - g.gamma1).abs() < 1e-7 && (d.im - g.gamma2).abs() < 1e-7);
            // γ₁ = (ln γ₂)'
            let dlog_g2 = numerics::derivative(|s| C64::new(sol.gamma(s).gamma2.ln(), 0.0), t, 0.1 * sol.time_scale()).re;
            assert!((dlog_g2 - g.gamma1).abs() < 1e-8);
        }
    }

    #[test]
    fn synthesized_field_reproduces_frequency() {
        for (basis, omega_sq) in [(harmonic(5.0), 25.0), (Arc::new(FreeBasis) as Arc<dyn OscillatorBasis>, 0.0)] {
            let sol = ErmakovSolution::standard(basis, C64::new(2.0, -1.0), 1.5).unwrap();
            let field = sol.field(0.7);
            for k in 0..40 {
                let t = k as f64 * 0.09;
                for mode in [DerivativeMode::Analytic, DerivativeMode::FiniteDifference] {
                    let w = frequency_from_field(&field, t, mode).unwrap();
                    assert!((w - omega_sq).norm() < 1e-6, "t={t} {mode:?}: {w}");
                }
            }
        }
    }

    #[test]
    fn phase_relation_over_one_period() {
        let sol = ErmakovSolution::standard(harmonic(5.0), C64::new(5f64.sqrt(), 0.0), 4.0).unwrap();
        let tau = sol.period().unwrap();
        let advance = C64::from_polar(1.0, sol.lambda() * sol.phase_integral(tau).unwrap());
        for k in 0..20 {
            let t = k as f64 * 0.031;
            let lhs = synthesize_field(&sol, t + tau).unwrap();
            let rhs = advance * synthesize_field(&sol, t).unwrap();
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }

    #[test]
    fn periodicity_search() {
        let g = C64::new(5f64.sqrt(), 0.0);
        let sol = ErmakovSolution::standard(harmonic(5.0), g, 4.0).unwrap();
        let spec = check_periodicity(&sol, DEFAULT_MAX_P).unwrap().unwrap();
        assert_eq!(spec.p, 3);
        assert!((spec.tau - PI / 5.0).abs() < 1e-15);
        for k in 0..200 {
            let t = k as f64 * 0.0173;
            let d = synthesize_field(&sol, t + spec.tau_p).unwrap() - synthesize_field(&sol, t).unwrap();
            assert!(d.norm() < 1e-8);
        }

        // g = 0, δ = 2: Ω₀ = 1 and the phase advance per period is exactly 2π
        let detuning = 2.0;
        let sol = ErmakovSolution::standard(harmonic(1.0), C64::new(0.0, 0.0), detuning).unwrap();
        assert_eq!(check_periodicity(&sol, DEFAULT_MAX_P).unwrap().map(|s| s.p), Some(1));

        let sp = PI.sqrt();
        let omega0 = (2.0 * PI).sqrt();
        let sol = ErmakovSolution::standard(harmonic(omega0 / 0.6), C64::new(sp, 0.0), 2.0 * sp).unwrap();
        assert_eq!(check_periodicity(&sol, DEFAULT_MAX_P).unwrap(), None);

        let sol = ErmakovSolution::standard(Arc::new(FreeBasis), g, 4.0).unwrap();
        assert_eq!(check_periodicity(&sol, DEFAULT_MAX_P).unwrap(), None);
    }

    #[test]
    fn mu_form_agrees_with_direct_form() {
        let sol = ErmakovSolution::standard(harmonic(5.0), C64::new(5f64.sqrt(), 0.0), 4.0).unwrap();
        let level_splitting = 1.0;
        let field = sol.field(level_splitting);
        let osc = sol.oscillator();
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        let direct = factorize_direct_grid(&field, &osc, &times).unwrap();
        let mu_form = mu_factorization_grid(&sol, &osc, level_splitting, &times).unwrap();
        assert_eq!(mu_form[0], Factors::ZERO);
        for ((t, d), m) in times.iter().zip(&direct).zip(&mu_form) {
            assert!(d.max_abs_diff(m) < 1e-9, "t={t}: {d:?} vs {m:?}");
        }
    }

    #[test]
    fn regular_propagator_matches_disentangled_product() {
        let sol = ErmakovSolution::standard(harmonic(2.5), C64::new(1.2, 0.4), -0.8).unwrap();
        let osc = sol.oscillator();
        for k in 0..60 {
            let t = k as f64 * 0.05;
            let f = mu_factorization(&sol, &osc, 0.6, t).unwrap();
            let u = f.propagator().unwrap();
            let v = propagator_from_solution(&sol, 0.6, t).unwrap();
            assert!(u.max_abs_diff(&v) < 1e-11, "t={t}");
            assert!(v.unitarity_defect() < 1e-12);
        }
    }

    #[test]
    fn regular_propagator_at_resonance_node() {
        // δ = 0: φ = cos(Ω₀t) vanishes at Ω₀t = π/2, the disentangled form is singular
        let g = 1.5;
        let sol = ErmakovSolution::standard(harmonic(g), C64::new(g, 0.0), 0.0).unwrap();
        let t = PI / (2.0 * g);
        assert!(matches!(mu_factorization(&sol, &sol.oscillator(), 0.0, t), Err(Error::Singularity { .. })));
        let u = propagator_from_solution(&sol, 0.0, t).unwrap();
        assert!(u.get(0, 0).norm() < 1e-15 && (u.get(1, 0).norm() - 1.0).abs() < 1e-15);
    }
}
