//! The driven qubit a run works on: one of the closed-form families, or a
//! field synthesized from a Pinney solution with arbitrary initial data.

use std::f64::consts::PI;
use std::sync::Arc;

use ermakov_qubit::ermakov::{
    map_initial_data, mu_factorization_grid, mu_factors_principal, propagator_from_solution, check_periodicity,
    ErmakovSolution, FreeBasis, HarmonicBasis, OscillatorBasis,
};
use ermakov_qubit::factorization::{DrivingField, Factors};
use ermakov_qubit::families::{build_family, Family, FamilyKind};
use ermakov_qubit::oracle::{
    uniform_grid, verify_family, verify_solution, AlphaFault, IntegrationConfig, Thresholds, VerificationReport,
};
use ermakov_qubit::su2::ComplexMat2;
use ermakov_qubit::{Error, C64};
use serde::Serialize;

use crate::config::{CustomSpec, ModelSpec, RunConfig, DEFAULT_PERIODS};
use crate::error::{CliError, CliResult};

/// Samples per period for the inversion minimum of the custom family.
const INVERSION_SAMPLES: usize = 2001;

#[derive(Clone)]
pub enum Model {
    Family(Arc<dyn Family>),
    Custom { sol: ErmakovSolution, level_splitting: f64 },
}

/// Parameters, periodicity and inversion extrema of one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub family: String,
    pub g_re: f64,
    pub g_im: f64,
    pub delta: f64,
    pub level_splitting: f64,
    pub omega0: f64,
    pub omega1: Option<f64>,
    pub kappa: Option<f64>,
    /// Least number of μ-periods after which the field repeats.
    pub p: Option<u32>,
    pub tau_p: Option<f64>,
    /// Minimum of the population inversion (the infimum for the decaying family).
    pub p_min: Option<f64>,
    /// Period of the population inversion.
    pub p_period: Option<f64>,
}

/// Parameter errors raised while building a model are usage errors.
fn as_usage(e: Error) -> CliError {
    match e {
        Error::Parameter(_) | Error::DegenerateFamily(_) | Error::Synthesis(_) | Error::InvalidPairing(_) => {
            CliError::Usage(e.to_string())
        }
        other => CliError::Numerical(other),
    }
}

impl Model {
    pub fn build(spec: &ModelSpec) -> CliResult<Self> {
        match spec {
            ModelSpec::Family { kind, params } => Ok(Model::Family(build_family(*kind, *params).map_err(as_usage)?)),
            ModelSpec::CustomPinney(c) => Self::custom(c),
        }
    }

    fn custom(c: &CustomSpec) -> CliResult<Self> {
        let data = map_initial_data(c.r0, c.r0_prime).map_err(as_usage)?;
        let omega0 = (c.r0.norm_sqr() + 0.25 * data.lambda * data.lambda).sqrt();
        let basis: Arc<dyn OscillatorBasis> = match (c.omega1, c.kappa) {
            (Some(w), _) => Arc::new(HarmonicBasis::new(w).map_err(as_usage)?),
            (None, Some(k)) => Arc::new(HarmonicBasis::new(omega0 / k).map_err(as_usage)?),
            (None, None) => Arc::new(FreeBasis),
        };
        let sol = ErmakovSolution::from_initial_data(basis, c.r0, c.r0_prime, c.constants).map_err(as_usage)?;
        Ok(Model::Custom { sol, level_splitting: c.level_splitting })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Model::Family(f) => f.kind().name(),
            Model::Custom { .. } => "custom-pinney",
        }
    }

    /// π/Ω₀, or the μ-period when μ oscillates.
    pub fn characteristic_period(&self) -> f64 {
        match self {
            Model::Family(f) => f.characteristic_period(),
            Model::Custom { sol, .. } => sol.period().unwrap_or(PI / sol.omega0()),
        }
    }

    pub fn t_max(&self, run: &RunConfig) -> f64 {
        run.t_max.unwrap_or(DEFAULT_PERIODS * self.characteristic_period())
    }

    pub fn grid(&self, run: &RunConfig) -> Vec<f64> {
        uniform_grid(self.t_max(run), run.points)
    }

    /// `R(t)` and `V(t)`.
    pub fn field(&self, t: f64) -> (C64, C64) {
        match self {
            Model::Family(f) => (f.r(t), f.v(t)),
            Model::Custom { sol, level_splitting } => {
                let field = sol.field(*level_splitting);
                (field.r(t), field.v(t))
            }
        }
    }

    pub fn mu(&self, t: f64) -> f64 {
        match self {
            Model::Family(f) => f.mu(t),
            Model::Custom { sol, .. } => sol.mu(t),
        }
    }

    /// `η = ∫₀ᵗ ds/μ²`.
    pub fn eta(&self, t: f64) -> CliResult<f64> {
        match self {
            Model::Family(f) => Ok(f.eta(t)),
            Model::Custom { sol, .. } => Ok(sol.phase_integral(t)?),
        }
    }

    /// Factorizing functions on an ascending grid, `None` where they are
    /// singular. The custom family continues `ln φ` along the grid and falls
    /// back to its principal branch when φ vanishes on the way.
    pub fn factors(&self, grid: &[f64]) -> Vec<Option<Factors>> {
        match self {
            Model::Family(f) => grid.iter().map(|&t| f.factors(t).ok()).collect(),
            Model::Custom { sol, level_splitting } => {
                let osc = sol.oscillator();
                match mu_factorization_grid(sol, &osc, *level_splitting, grid) {
                    Ok(all) => all.into_iter().map(Some).collect(),
                    Err(_) => grid
                        .iter()
                        .map(|&t| mu_factors_principal(sol, &osc, *level_splitting, t).ok())
                        .collect(),
                }
            }
        }
    }

    /// Propagator in the form that stays finite where φ vanishes.
    pub fn propagator(&self, t: f64) -> CliResult<ComplexMat2> {
        match self {
            Model::Family(f) => Ok(f.regular_propagator(t)),
            Model::Custom { sol, level_splitting } => Ok(propagator_from_solution(sol, *level_splitting, t)?),
        }
    }

    pub fn integration_config(&self, run: &RunConfig) -> CliResult<IntegrationConfig> {
        let t_max = self.t_max(run);
        let mut config = match self {
            Model::Family(f) => IntegrationConfig::for_family(f.as_ref(), t_max),
            Model::Custom { sol, level_splitting } => IntegrationConfig::for_solution(sol, *level_splitting, t_max),
        };
        if let Some(tol) = run.abs_tol {
            config.abs_tol = tol;
        }
        if let Some(tol) = run.rel_tol {
            config.rel_tol = tol;
        }
        config.validate().map_err(as_usage)?;
        Ok(config)
    }

    /// Compares the disentangled closed form with numerical integration on the
    /// run grid. `alpha_fault` scales the closed-form α first.
    pub fn verify(
        &self,
        run: &RunConfig,
        thresholds: &Thresholds,
        alpha_fault: Option<f64>,
    ) -> CliResult<VerificationReport> {
        let config = self.integration_config(run)?;
        let grid = self.grid(run);
        match (self, alpha_fault) {
            (Model::Family(f), None) => Ok(verify_family(f.as_ref(), &config, thresholds, &grid)?),
            (Model::Family(f), Some(factor)) => {
                Ok(verify_family(&AlphaFault::new(f.clone(), factor), &config, thresholds, &grid)?)
            }
            (Model::Custom { sol, level_splitting }, None) => {
                Ok(verify_solution(sol, *level_splitting, &config, thresholds, &grid)?)
            }
            (Model::Custom { .. }, Some(_)) => {
                Err(CliError::Usage("fault injection applies to the closed-form families only".into()))
            }
        }
    }

    pub fn summary(&self, max_p: u32) -> CliResult<RunSummary> {
        match self {
            Model::Family(f) => {
                let p = f.params();
                let periodicity = f.periodicity(max_p)?;
                // (δ²/4 − |g|²)/Ω₀² is the minimum for the periodic families and
                // the long-time limit for the decaying one
                let omega0 = f.omega0();
                let p_min = (0.25 * p.delta * p.delta - p.g.norm_sqr()) / (omega0 * omega0);
                let p_period = match f.kind() {
                    FamilyKind::Circular => Some(PI / omega0),
                    FamilyKind::Oscillating => p.omega1.map(|w| PI / w),
                    FamilyKind::Decaying => None,
                };
                Ok(RunSummary {
                    family: f.kind().name().to_owned(),
                    g_re: p.g.re,
                    g_im: p.g.im,
                    delta: p.delta,
                    level_splitting: p.level_splitting,
                    omega0,
                    omega1: p.omega1,
                    kappa: p.kappa(),
                    p: periodicity.map(|s| s.p),
                    tau_p: periodicity.map(|s| s.tau_p),
                    p_min: Some(p_min),
                    p_period,
                })
            }
            Model::Custom { sol, level_splitting } => {
                let periodicity = check_periodicity(sol, max_p)?;
                let omega1 = sol.period().map(|tau| PI / tau);
                let p_min = match sol.period() {
                    Some(tau) => {
                        let mut lo = f64::INFINITY;
                        for t in uniform_grid(tau, INVERSION_SAMPLES) {
                            let u = propagator_from_solution(sol, *level_splitting, t)?;
                            lo = lo.min(u.get(0, 0).norm_sqr() - u.get(1, 0).norm_sqr());
                        }
                        Some(lo)
                    }
                    None => None,
                };
                // R₀ = −iḡ
                let g = (C64::i() * sol.r0()).conj();
                Ok(RunSummary {
                    family: self.label().to_owned(),
                    g_re: g.re,
                    g_im: g.im,
                    delta: sol.lambda(),
                    level_splitting: *level_splitting,
                    omega0: sol.omega0(),
                    omega1,
                    kappa: omega1.map(|w| sol.omega0() / w),
                    p: periodicity.map(|s| s.p),
                    tau_p: periodicity.map(|s| s.tau_p),
                    p_min,
                    p_period: sol.period(),
                })
            }
        }
    }
}
