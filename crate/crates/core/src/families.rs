//! Closed-form field families with `R₀ = −iḡ` and `(ln R)'(0) = iδ`.
//!
//! | family      | Ω²  | μ²                    | η                                  |
//! |-------------|-----|-----------------------|------------------------------------|
//! | circular    | Ω₀² | 1                     | t                                  |
//! | decaying    | 0   | Ω₀²t² + 1             | arctan(Ω₀t)/Ω₀                     |
//! | oscillating | Ω₁² | cos²Ω₁t + κ² sin²Ω₁t  | arctan(κ tan Ω₁t)/Ω₀, branch-continued |
//!
//! with `Ω₀² = |g|² + δ²/4` and `κ = Ω₀/Ω₁`. Every family's field is
//! `R = (R₀/μ²) e^{iδη}` and its propagator is known in closed form.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::ermakov::{
    check_periodicity, fundamental_propagator, ErmakovSolution, FreeBasis, FundamentalData, HarmonicBasis,
    PeriodicitySpec,
};
use crate::factorization::{hamiltonian_params, DrivingField, Factors, OscillatorSolution};
use crate::numerics::unwrapped_atan_tan;
use crate::su2::{compose_propagator, ComplexMat2, HamiltonianParams, QubitState};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Closed-form denominators below this modulus raise [`Error::Singularity`].
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    pub g: C64,
    pub delta: f64,
    pub level_splitting: f64,
    pub omega1: Option<f64>,
}

impl FamilyParams {
    pub fn new(g: C64, delta: f64, level_splitting: f64) -> Self {
        Self { g, delta, level_splitting, omega1: None }
    }

    pub fn with_omega1(mut self, omega1: f64) -> Self {
        self.omega1 = Some(omega1);
        self
    }

    /// Sets `Ω₁ = Ω₀/κ`.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.omega1 = Some(self.omega0() / kappa);
        self
    }

    /// `Ω₀ = √(|g|² + δ²/4)`.
    pub fn omega0(&self) -> f64 {
        (self.g.norm_sqr() + 0.25 * self.delta * self.delta).sqrt()
    }

    pub fn kappa(&self) -> Option<f64> {
        self.omega1.map(|w| self.omega0() / w)
    }

    /// `R₀ = −iḡ`.
    pub fn r0(&self) -> C64 {
        -I * self.g.conj()
    }

    fn check_finite(&self) -> Result<()> {
        let finite = self.g.re.is_finite()
            && self.g.im.is_finite()
            && self.delta.is_finite()
            && self.level_splitting.is_finite()
            && self.omega1.is_none_or(f64::is_finite);
        if finite {
            Ok(())
        } else {
            Err(Error::Parameter(format!("non-finite family parameters: {self:?}")))
        }
    }

    fn check_omega0(&self) -> Result<f64> {
        let omega0 = self.omega0();
        if omega0 > 0.0 {
            Ok(omega0)
        } else {
            Err(Error::DegenerateFamily("Ω₀ = 0 (g = 0 and δ = 0)".into()))
        }
    }
}

/// Transverse components `B₁(t), B₂(t)`, axial `B₃` and coupling constant `b`.
#[derive(Clone)]
pub struct MagneticField {
    pub b1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub b2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub b3: f64,
    pub b: f64,
}

impl fmt::Debug for MagneticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MagneticField").field("b3", &self.b3).field("b", &self.b).finish_non_exhaustive()
    }
}

impl MagneticField {
    pub fn new<F1, F2>(b1: F1, b2: F2, b3: f64, b: f64) -> Result<Self>
    where
        F1: Fn(f64) -> f64 + Send + Sync + 'static,
        F2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(b3.is_finite() && b.is_finite()) {
            return Err(Error::Parameter(format!("non-finite magnetic constants B₃ = {b3}, b = {b}")));
        }
        Ok(Self { b1: Arc::new(b1), b2: Arc::new(b2), b3, b })
    }
}

/// `V(t) = b[B₁(t) − iB₂(t)]/2`, `Δ = bB₃`.
pub fn magnetic_to_qubit(field: &MagneticField) -> HamiltonianParams {
    let (b1, b2, b) = (field.b1.clone(), field.b2.clone(), field.b);
    HamiltonianParams::new(b * field.b3, move |t| C64::new(b1(t), -b2(t)) * (0.5 * b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Circular,
    Decaying,
    Oscillating,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Circular => "circular",
            FamilyKind::Decaying => "decaying",
            FamilyKind::Oscillating => "oscillating",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A field family with closed-form μ, η, factorizing functions and state.
///
/// The driving field and its paired oscillator solution come from the
/// [`DrivingField`] and [`OscillatorSolution`] supertraits.
pub trait Family: DrivingField + OscillatorSolution {
    fn kind(&self) -> FamilyKind;

    fn params(&self) -> &FamilyParams;

    fn omega0(&self) -> f64 {
        self.params().omega0()
    }

    /// The constant Ω² the family was built for.
    fn prescribed_omega_sq(&self) -> f64;

    /// `(μ², (μ²)', (μ²)'')`.
    fn mu_sq_derivatives(&self, t: f64) -> (f64, f64, f64);

    fn mu_sq(&self, t: f64) -> f64 {
        self.mu_sq_derivatives(t).0
    }

    fn mu(&self, t: f64) -> f64 {
        self.mu_sq(t).sqrt()
    }

    fn mu_prime(&self, t: f64) -> f64 {
        let (m2, dm2, _) = self.mu_sq_derivatives(t);
        0.5 * dm2 / m2.sqrt()
    }

    /// `∫₀ᵗ ds/μ²`.
    fn eta(&self, t: f64) -> f64;

    fn factors(&self, t: f64) -> Result<Factors>;

    /// Disentangled product of the closed-form factorizing functions.
    fn propagator(&self, t: f64) -> Result<ComplexMat2> {
        let f = self.factors(t)?;
        compose_propagator(f.alpha, f.delta_f, f.beta).map_err(|e| match e {
            Error::Range { value, .. } => Error::Range { t, value },
            other => other,
        })
    }

    /// The same propagator written without dividing by φ; finite at zeros of φ.
    fn regular_propagator(&self, t: f64) -> ComplexMat2 {
        let p = self.params();
        let (w, w_prime) = self.companion(t).expect("families carry a companion solution");
        fundamental_propagator(&FundamentalData {
            phi: self.phi(t),
            phi_prime: self.phi_prime(t),
            w,
            w_prime,
            mu: self.mu(t),
            mu_prime: self.mu_prime(t),
            lambda: p.delta,
            r0: p.r0(),
            theta: p.delta * self.eta(t) + p.level_splitting * t,
        })
    }

    /// Closed-form `U(t)|p⟩`.
    fn state(&self, t: f64) -> QubitState;

    /// Closed-form population inversion for `ψ₀ = |p⟩`.
    fn population_inversion(&self, t: f64) -> f64;

    /// π/Ω₀ for the circular and decaying families, the μ-period π/Ω₁ otherwise.
    fn characteristic_period(&self) -> f64;

    /// The general Ermakov construction this family specializes, carrying the
    /// closed-form phase integral.
    fn ermakov(&self) -> Result<ErmakovSolution>;

    fn hamiltonian(&self) -> HamiltonianParams;

    fn periodicity(&self, max_p: u32) -> Result<Option<PeriodicitySpec>> {
        check_periodicity(&self.ermakov()?, max_p)
    }
}

/// `R = (R₀/μ²)e^{iδη}` and its first two derivatives from μ² data.
fn field_with_derivatives(r0: C64, delta: f64, eta: f64, (m2, dm2, ddm2): (f64, f64, f64)) -> (C64, C64, C64) {
    let r = r0 / m2 * C64::from_polar(1.0, delta * eta);
    let gamma = C64::new(-dm2 / m2, delta / m2);
    let dgamma = C64::new(-ddm2 / m2 + (dm2 / m2).powi(2), -delta * dm2 / (m2 * m2));
    (r, gamma * r, (gamma * gamma + dgamma) * r)
}

/// Continuous `ln φ` for `φ = cos x − ik sin x`, `x = ωt`.
fn log_harmonic_phi(k: f64, x: f64) -> C64 {
    let (s, c) = x.sin_cos();
    C64::new(0.5 * (c * c + k * k * s * s).ln(), -unwrapped_atan_tan(k, x))
}

fn checked_denominator(d: C64, t: f64) -> Result<C64> {
    if d.norm() < DENOMINATOR_FLOOR {
        Err(Error::Singularity { t, what: "closed-form denominator vanishes" })
    } else {
        Ok(d)
    }
}

/// Harmonic-type factors shared by the circular and oscillating families:
/// `α = −2ig sin(ωt) e^{−iθ}/D`, `β = −2iḡ sin(ωt)/D`, `D = 2ω cos ωt − iδ sin ωt`.
fn harmonic_factors(p: &FamilyParams, omega: f64, mu_sq: f64, theta: f64, t: f64) -> Result<Factors> {
    let (s, c) = (omega * t).sin_cos();
    let d = checked_denominator(C64::new(2.0 * omega * c, -p.delta * s), t)?;
    let alpha = -2.0 * I * p.g * s * C64::from_polar(1.0, -theta) / d;
    let beta = -2.0 * I * p.g.conj() * s / d;
    let delta_f = mu_sq.ln() - 2.0 * log_harmonic_phi(p.delta / (2.0 * omega), omega * t) - I * theta;
    Ok(Factors::new(alpha, delta_f, beta))
}

/// `φ = cos ωt − (iδ/2ω) sin ωt` and `φ'`.
fn harmonic_phi(delta: f64, omega: f64, t: f64) -> (C64, C64) {
    let (s, c) = (omega * t).sin_cos();
    (C64::new(c, -0.5 * delta / omega * s), C64::new(-omega * s, -0.5 * delta * c))
}

macro_rules! impl_driving_field {
    ($ty:ty) => {
        impl DrivingField for $ty {
            fn r(&self, t: f64) -> C64 {
                field_with_derivatives(self.params.r0(), self.params.delta, self.eta(t), self.mu_sq_derivatives(t)).0
            }
            fn level_splitting(&self) -> f64 {
                self.params.level_splitting
            }
            fn r_derivatives(&self, t: f64) -> Option<(C64, C64)> {
                let (_, d1, d2) =
                    field_with_derivatives(self.params.r0(), self.params.delta, self.eta(t), self.mu_sq_derivatives(t));
                Some((d1, d2))
            }
            fn time_scale(&self) -> f64 {
                self.scale
            }
            fn r0(&self) -> C64 {
                self.params.r0()
            }
            fn log_r_prime0(&self) -> C64 {
                C64::new(0.0, self.params.delta)
            }
        }
    };
}

/// Circularly polarized drive `R = −iḡe^{iδt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularFamily {
    params: FamilyParams,
    omega0: f64,
    scale: f64,
}

impl CircularFamily {
    pub fn new(params: FamilyParams) -> Result<Self> {
        params.check_finite()?;
        let omega0 = params.check_omega0()?;
        Ok(Self { params, omega0, scale: 1.0 / omega0.max(params.delta.abs()) })
    }
}

impl_driving_field!(CircularFamily);

impl OscillatorSolution for CircularFamily {
    fn phi(&self, t: f64) -> C64 {
        harmonic_phi(self.params.delta, self.omega0, t).0
    }
    fn phi_prime(&self, t: f64) -> C64 {
        harmonic_phi(self.params.delta, self.omega0, t).1
    }
    fn companion(&self, t: f64) -> Option<(C64, C64)> {
        let (s, c) = (self.omega0 * t).sin_cos();
        Some((C64::new(s / self.omega0, 0.0), C64::new(c, 0.0)))
    }
    fn oscillation_scale(&self) -> f64 {
        self.scale
    }
}

impl Family for CircularFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Circular
    }
    fn params(&self) -> &FamilyParams {
        &self.params
    }
    fn prescribed_omega_sq(&self) -> f64 {
        self.omega0 * self.omega0
    }
    fn mu_sq_derivatives(&self, _t: f64) -> (f64, f64, f64) {
        (1.0, 0.0, 0.0)
    }
    fn eta(&self, t: f64) -> f64 {
        t
    }
    /// `ω = δ + Δ`; `Δf = −2 ln φ − iωt`.
    fn factors(&self, t: f64) -> Result<Factors> {
        let p = &self.params;
        harmonic_factors(p, self.omega0, 1.0, (p.delta + p.level_splitting) * t, t)
    }
    fn state(&self, t: f64) -> QubitState {
        let p = &self.params;
        let omega = p.delta + p.level_splitting;
        let (s, c) = (self.omega0 * t).sin_cos();
        let cp = C64::from_polar(1.0, -0.5 * omega * t) * C64::new(c, 0.5 * p.delta / self.omega0 * s);
        let cq = -I * p.g.conj() / self.omega0 * C64::from_polar(1.0, 0.5 * omega * t) * s;
        QubitState::new(cp, cq)
    }
    /// `P = (|g|²/Ω₀²) cos 2Ω₀t + δ²/4Ω₀²`.
    fn population_inversion(&self, t: f64) -> f64 {
        let w2 = self.omega0 * self.omega0;
        self.params.g.norm_sqr() / w2 * (2.0 * self.omega0 * t).cos() + 0.25 * self.params.delta.powi(2) / w2
    }
    fn characteristic_period(&self) -> f64 {
        PI / self.omega0
    }
    fn ermakov(&self) -> Result<ErmakovSolution> {
        let basis = Arc::new(HarmonicBasis::new(self.omega0)?);
        Ok(ErmakovSolution::standard(basis, self.params.g, self.params.delta)?.with_phase_integral(|t| t))
    }
    fn hamiltonian(&self) -> HamiltonianParams {
        hamiltonian_params(Arc::new(*self))
    }
}

/// `Ω = 0`: `μ² = Ω₀²t² + 1` and a field decaying as `1/t²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayingFamily {
    params: FamilyParams,
    omega0: f64,
    scale: f64,
}

impl DecayingFamily {
    pub fn new(params: FamilyParams) -> Result<Self> {
        params.check_finite()?;
        let omega0 = params.check_omega0()?;
        Ok(Self { params, omega0, scale: 0.5 / omega0 })
    }

    /// `P(∞) = (δ²/4 − |g|²)/Ω₀²`.
    pub fn asymptotic_inversion(&self) -> f64 {
        (0.25 * self.params.delta.powi(2) - self.params.g.norm_sqr()) / (self.omega0 * self.omega0)
    }
}

impl_driving_field!(DecayingFamily);

impl OscillatorSolution for DecayingFamily {
    fn phi(&self, t: f64) -> C64 {
        C64::new(1.0, -0.5 * self.params.delta * t)
    }
    fn phi_prime(&self, _t: f64) -> C64 {
        C64::new(0.0, -0.5 * self.params.delta)
    }
    fn companion(&self, t: f64) -> Option<(C64, C64)> {
        Some((C64::new(t, 0.0), C64::new(1.0, 0.0)))
    }
    fn oscillation_scale(&self) -> f64 {
        self.scale
    }
}

impl Family for DecayingFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Decaying
    }
    fn params(&self) -> &FamilyParams {
        &self.params
    }
    fn prescribed_omega_sq(&self) -> f64 {
        0.0
    }
    fn mu_sq_derivatives(&self, t: f64) -> (f64, f64, f64) {
        let w2 = self.omega0 * self.omega0;
        (w2 * t * t + 1.0, 2.0 * w2 * t, 2.0 * w2)
    }
    fn eta(&self, t: f64) -> f64 {
        (self.omega0 * t).atan() / self.omega0
    }
    /// `α = −2igt e^{−iθ}/(2 − iδt)`, `β = −2iḡt/(2 − iδt)`,
    /// `Δf = ln[4μ²/(2 − iδt)²] − iθ` with `θ = Δt + δη`.
    fn factors(&self, t: f64) -> Result<Factors> {
        let p = &self.params;
        let d = C64::new(2.0, -p.delta * t);
        let theta = p.level_splitting * t + p.delta * self.eta(t);
        let alpha = -2.0 * I * p.g * t * C64::from_polar(1.0, -theta) / d;
        let beta = -2.0 * I * p.g.conj() * t / d;
        let delta_f = (4.0 * self.mu_sq(t)).ln() - 2.0 * d.ln() - I * theta;
        Ok(Factors::new(alpha, delta_f, beta))
    }
    fn state(&self, t: f64) -> QubitState {
        let p = &self.params;
        let mu = self.mu(t);
        let theta = p.level_splitting * t + p.delta * self.eta(t);
        let cp = C64::new(2.0, p.delta * t) / (2.0 * mu) * C64::from_polar(1.0, -0.5 * theta);
        let cq = -I * p.g.conj() * t / mu * C64::from_polar(1.0, 0.5 * theta);
        QubitState::new(cp, cq)
    }
    /// `P = [(δ²/4 − |g|²)t² + 1]/(Ω₀²t² + 1)`.
    fn population_inversion(&self, t: f64) -> f64 {
        let p = &self.params;
        ((0.25 * p.delta * p.delta - p.g.norm_sqr()) * t * t + 1.0) / self.mu_sq(t)
    }
    fn characteristic_period(&self) -> f64 {
        PI / self.omega0
    }
    fn ermakov(&self) -> Result<ErmakovSolution> {
        let omega0 = self.omega0;
        Ok(ErmakovSolution::standard(Arc::new(FreeBasis), self.params.g, self.params.delta)?
            .with_phase_integral(move |t| (omega0 * t).atan() / omega0))
    }
    fn hamiltonian(&self) -> HamiltonianParams {
        hamiltonian_params(Arc::new(*self))
    }
}

/// Branch-continued `∫₀ᵗ ds/(cos²Ω₁s + κ² sin²Ω₁s) = [arctan(κ tan Ω₁t) + nπ]/Ω₀`
/// with `n = round(Ω₁t/π)`; equals `(2m+1)π/2Ω₀` at `t = (2m+1)π/2Ω₁`.
pub fn eta(t: f64, params: &FamilyParams) -> Result<f64> {
    let omega1 = params.omega1.ok_or_else(|| Error::Parameter("η needs Ω₁".into()))?;
    if !(omega1 > 0.0) {
        return Err(Error::Parameter(format!("Ω₁ must be positive, got {omega1}")));
    }
    let omega0 = params.check_omega0()?;
    if !(t >= 0.0) {
        return Err(Error::Parameter(format!("η is defined for t ≥ 0, got {t}")));
    }
    Ok(unwrapped_atan_tan(omega0 / omega1, omega1 * t) / omega0)
}

/// `Ω = Ω₁`: precessing field with amplitude oscillating between `|g|` and `|g|/κ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatingFamily {
    params: FamilyParams,
    omega0: f64,
    omega1: f64,
    kappa: f64,
    scale: f64,
}

impl OscillatingFamily {
    pub fn new(params: FamilyParams) -> Result<Self> {
        params.check_finite()?;
        let omega1 = match params.omega1 {
            Some(w) if w > 0.0 => w,
            other => return Err(Error::Parameter(format!("Ω₁ must be positive, got {other:?}"))),
        };
        let omega0 = params.check_omega0()?;
        let kappa = omega0 / omega1;
        let sharpness = kappa.min(1.0 / kappa);
        let phase_rate = params.delta.abs() / kappa.min(1.0).powi(2);
        let scale = (sharpness / omega1).min(1.0 / omega0).min(1.0 / phase_rate);
        Ok(Self { params, omega0, omega1, kappa, scale })
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// `P_min = (δ² − 4|g|²)/(δ² + 4|g|²)`, independent of κ.
    pub fn inversion_minimum(&self) -> f64 {
        let d2 = self.params.delta.powi(2);
        let g2 = 4.0 * self.params.g.norm_sqr();
        (d2 - g2) / (d2 + g2)
    }

    /// `t_n = nπ/2Ω₁`.
    pub fn extremum_time(&self, n: u32) -> f64 {
        n as f64 * PI / (2.0 * self.omega1)
    }

    /// Period `π/Ω₁` of μ and P.
    pub fn mu_period(&self) -> f64 {
        PI / self.omega1
    }
}

impl_driving_field!(OscillatingFamily);

impl OscillatorSolution for OscillatingFamily {
    fn phi(&self, t: f64) -> C64 {
        harmonic_phi(self.params.delta, self.omega1, t).0
    }
    fn phi_prime(&self, t: f64) -> C64 {
        harmonic_phi(self.params.delta, self.omega1, t).1
    }
    fn companion(&self, t: f64) -> Option<(C64, C64)> {
        let (s, c) = (self.omega1 * t).sin_cos();
        Some((C64::new(s / self.omega1, 0.0), C64::new(c, 0.0)))
    }
    fn oscillation_scale(&self) -> f64 {
        self.scale
    }
}

impl Family for OscillatingFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::Oscillating
    }
    fn params(&self) -> &FamilyParams {
        &self.params
    }
    fn prescribed_omega_sq(&self) -> f64 {
        self.omega1 * self.omega1
    }
    fn mu_sq_derivatives(&self, t: f64) -> (f64, f64, f64) {
        let x = self.omega1 * t;
        let (s, c) = x.sin_cos();
        let a = self.kappa * self.kappa - 1.0;
        (c * c + self.kappa * self.kappa * s * s, a * self.omega1 * (2.0 * x).sin(), 2.0 * a * self.omega1.powi(2) * (2.0 * x).cos())
    }
    fn eta(&self, t: f64) -> f64 {
        unwrapped_atan_tan(self.kappa, self.omega1 * t) / self.omega0
    }
    /// `α = −2ig sin(Ω₁t) e^{−iθ}/D`, `β = −2iḡ sin(Ω₁t)/D`,
    /// `Δf = ln(μ²/φ²) − iθ`, `D = 2Ω₁cos Ω₁t − iδ sin Ω₁t`, `θ = Δt + δη`.
    fn factors(&self, t: f64) -> Result<Factors> {
        let p = &self.params;
        let theta = p.level_splitting * t + p.delta * self.eta(t);
        harmonic_factors(p, self.omega1, self.mu_sq(t), theta, t)
    }
    fn state(&self, t: f64) -> QubitState {
        let p = &self.params;
        let (s, c) = (self.omega1 * t).sin_cos();
        let mu = self.mu(t);
        let theta = p.level_splitting * t + p.delta * self.eta(t);
        let cp = C64::from_polar(1.0 / mu, -0.5 * theta) * C64::new(c, 0.5 * p.delta / self.omega1 * s);
        let cq = -I * p.g.conj() * C64::from_polar(1.0 / mu, 0.5 * theta) * (s / self.omega1);
        QubitState::new(cp, cq)
    }
    /// `P = [4Ω₁² cos² + (δ² − 4|g|²) sin²] / [4Ω₁²(cos² + κ² sin²)]`.
    fn population_inversion(&self, t: f64) -> f64 {
        let (s, c) = (self.omega1 * t).sin_cos();
        let w = 4.0 * self.omega1 * self.omega1;
        let p = &self.params;
        (w * c * c + (p.delta * p.delta - 4.0 * p.g.norm_sqr()) * s * s) / (w * (c * c + self.kappa * self.kappa * s * s))
    }
    fn characteristic_period(&self) -> f64 {
        PI / self.omega1
    }
    fn ermakov(&self) -> Result<ErmakovSolution> {
        let basis = Arc::new(HarmonicBasis::new(self.omega1)?);
        let (kappa, omega0, omega1) = (self.kappa, self.omega0, self.omega1);
        Ok(ErmakovSolution::standard(basis, self.params.g, self.params.delta)?
            .with_phase_integral(move |t| unwrapped_atan_tan(kappa, omega1 * t) / omega0))
    }
    fn hamiltonian(&self) -> HamiltonianParams {
        hamiltonian_params(Arc::new(*self))
    }
}

/// Builds the family named by `kind`; the oscillating family needs `params.omega1`.
pub fn build_family(kind: FamilyKind, params: FamilyParams) -> Result<Arc<dyn Family>> {
    Ok(match kind {
        FamilyKind::Circular => Arc::new(CircularFamily::new(params)?),
        FamilyKind::Decaying => Arc::new(DecayingFamily::new(params)?),
        FamilyKind::Oscillating => Arc::new(OscillatingFamily::new(params)?),
    })
}
