//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use ermakov_qubit::ermakov::DEFAULT_MAX_P;
use ermakov_qubit::families::{FamilyKind, FamilyParams};
use ermakov_qubit::oracle::Thresholds;
use ermakov_qubit::C64;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_POINTS: usize = 1000;
pub const MAX_SCAN_CELLS: usize = 10_000;
/// Default window length in characteristic periods.
pub const DEFAULT_PERIODS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Circular,
    Decaying,
    Oscillating,
    /// Pinney solution on a harmonic (`omega1` or `kappa` given) or free basis
    /// with arbitrary initial field data.
    CustomPinney,
}

impl FamilyName {
    pub fn kind(self) -> Option<FamilyKind> {
        match self {
            FamilyName::Circular => Some(FamilyKind::Circular),
            FamilyName::Decaying => Some(FamilyKind::Decaying),
            FamilyName::Oscillating => Some(FamilyKind::Oscillating),
            FamilyName::CustomPinney => None,
        }
    }
}

/// Column groups of the trajectory CSV, plus the verification report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    /// `re_r, im_r, abs_r, re_v, im_v`.
    Field,
    /// `re_alpha, im_alpha, re_delta_f, im_delta_f, re_beta, im_beta, mu, eta`.
    Factorization,
    /// `pop_p, pop_q, unitarity_defect`.
    State,
    /// `inversion`.
    Inversion,
    /// Verification report.
    Verify,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub propagator: Option<f64>,
    pub unitarity: Option<f64>,
    pub ermakov: Option<f64>,
    pub schrodinger: Option<f64>,
    /// Integrator absolute tolerance.
    pub abs: Option<f64>,
    /// Integrator relative tolerance.
    pub rel: Option<f64>,
}

/// Initial field data `R₀`, `R₀'` and Pinney constants of the custom family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinneySpec {
    pub r0_re: Option<f64>,
    pub r0_im: Option<f64>,
    pub r0_prime_re: Option<f64>,
    pub r0_prime_im: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

/// Values along one scan axis: an explicit list, or `steps` equally spaced
/// values from `from` to `to` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Values(Vec<f64>),
    Range { from: f64, to: f64, steps: usize },
}

impl AxisSpec {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        let values = match self {
            AxisSpec::Values(v) => v.clone(),
            AxisSpec::Range { from, to, steps } => match steps {
                0 => Vec::new(),
                1 => vec![*from],
                n => (0..*n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
            },
        };
        if values.is_empty() {
            return Err(CliError::Usage("scan axis has no values".into()));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(CliError::Usage(format!("scan axis value {x} is not finite")));
        }
        Ok(values)
    }
}

impl FromStr for AxisSpec {
    type Err = String;

    /// `a,b,c` or `from:to:steps`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [list] => list.split(',').map(num).collect::<Result<Vec<_>, _>>().map(AxisSpec::Values),
            [from, to, steps] => Ok(AxisSpec::Range {
                from: num(from)?,
                to: num(to)?,
                steps: steps.trim().parse().map_err(|e| format!("bad step count {steps:?}: {e}"))?,
            }),
            _ => Err(format!("expected a,b,c or from:to:steps, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub g_re: Option<AxisSpec>,
    pub g_im: Option<AxisSpec>,
    pub delta: Option<AxisSpec>,
    pub level_splitting: Option<AxisSpec>,
    pub omega1: Option<AxisSpec>,
    pub kappa: Option<AxisSpec>,
}

/// Everything a run can be configured with. Every field is optional so that
/// a file and the command line can each supply part of it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub family: Option<FamilyName>,
    pub g_re: Option<f64>,
    pub g_im: Option<f64>,
    pub delta: Option<f64>,
    /// Δ, the level splitting.
    pub level_splitting: Option<f64>,
    pub omega1: Option<f64>,
    pub kappa: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    pub max_p: Option<u32>,
    pub outputs: Option<Vec<OutputKind>>,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub pinney: PinneySpec,
    #[serde(default)]
    pub scan: ScanSpec,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::ConfigRead { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::ConfigParse { path: path.into(), source })
    }

    /// Sets Ω₁ and forgets κ.
    pub fn set_omega1(&mut self, omega1: f64) {
        self.omega1 = Some(omega1);
        self.kappa = None;
    }

    /// Sets κ and forgets Ω₁.
    pub fn set_kappa(&mut self, kappa: f64) {
        self.kappa = Some(kappa);
        self.omega1 = None;
    }
}

/// Which model a run is about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    Family { kind: FamilyKind, params: FamilyParams },
    CustomPinney(CustomSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CustomSpec {
    pub r0: C64,
    pub r0_prime: C64,
    /// Harmonic basis frequency; `None` selects the free basis.
    pub omega1: Option<f64>,
    pub kappa: Option<f64>,
    pub constants: Option<(f64, f64)>,
    pub level_splitting: f64,
}

/// A fully resolved run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    /// `None` means five characteristic periods.
    pub t_max: Option<f64>,
    pub points: usize,
    pub max_p: u32,
    pub thresholds: Thresholds,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub outputs: Vec<OutputKind>,
}

fn require(value: Option<f64>, name: &str) -> CliResult<f64> {
    let x = value.ok_or_else(|| CliError::Usage(format!("missing --{name}")))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::Usage(format!("--{name} must be finite, got {x}")))
    }
}

fn positive(value: Option<f64>, name: &str) -> CliResult<Option<f64>> {
    match value {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Usage(format!("--{name} must be positive, got {x}"))),
        other => Ok(other),
    }
}

impl RunConfig {
    /// Validates `file` and fills in defaults. `outputs` applies when the file
    /// names none.
    pub fn resolve(file: &ConfigFile, outputs: &[OutputKind]) -> CliResult<Self> {
        let family = file.family.ok_or_else(|| CliError::Usage("missing --family".into()))?;
        if file.omega1.is_some() && file.kappa.is_some() {
            return Err(CliError::Usage("give only one of omega1 and kappa".into()));
        }
        let omega1 = positive(file.omega1, "omega1")?;
        let kappa = positive(file.kappa, "kappa")?;
        let level_splitting = require(Some(file.level_splitting.unwrap_or(0.0)), "Delta")?;
        let g_im = require(Some(file.g_im.unwrap_or(0.0)), "g-im")?;
        let model = match family.kind() {
            Some(kind) => {
                let g = C64::new(require(file.g_re, "g-re")?, g_im);
                let mut params = FamilyParams::new(g, require(file.delta, "delta")?, level_splitting);
                match (kind, omega1, kappa) {
                    (FamilyKind::Oscillating, Some(w), None) => params = params.with_omega1(w),
                    (FamilyKind::Oscillating, None, Some(k)) => params = params.with_kappa(k),
                    (FamilyKind::Oscillating, None, None) => {
                        return Err(CliError::Usage("the oscillating family needs --omega1 or --kappa".into()))
                    }
                    (_, None, None) => {}
                    (kind, _, _) => {
                        return Err(CliError::Usage(format!("the {kind} family takes no --omega1 or --kappa")))
                    }
                }
                if params.omega0() == 0.0 {
                    return Err(CliError::Usage("g = 0 and delta = 0 define no family".into()));
                }
                ModelSpec::Family { kind, params }
            }
            None => ModelSpec::CustomPinney(Self::custom(file, g_im, level_splitting, omega1, kappa)?),
        };
        let t_max = positive(file.t_max, "t-max")?;
        let points = file.points.unwrap_or(DEFAULT_POINTS);
        if points < 2 {
            return Err(CliError::Usage(format!("--points must be at least 2, got {points}")));
        }
        let max_p = file.max_p.unwrap_or(DEFAULT_MAX_P);
        if max_p == 0 {
            return Err(CliError::Usage("--max-p must be at least 1".into()));
        }
        let tol = &file.tolerances;
        let defaults = Thresholds::default();
        let thresholds = Thresholds {
            propagator: positive(tol.propagator, "tol-propagator")?.unwrap_or(defaults.propagator),
            unitarity: positive(tol.unitarity, "tol-unitarity")?.unwrap_or(defaults.unitarity),
            ermakov: positive(tol.ermakov, "tol-ermakov")?.unwrap_or(defaults.ermakov),
            schrodinger: positive(tol.schrodinger, "tol-schrodinger")?.unwrap_or(defaults.schrodinger),
        };
        let mut outputs = file.outputs.clone().unwrap_or_else(|| outputs.to_vec());
        outputs.sort();
        outputs.dedup();
        Ok(Self {
            model,
            t_max,
            points,
            max_p,
            thresholds,
            abs_tol: positive(tol.abs, "tol-abs")?,
            rel_tol: positive(tol.rel, "tol-rel")?,
            outputs,
        })
    }

    /// Initial data defaults to the standard convention `R₀ = −iḡ`,
    /// `R₀' = iδR₀`, so `g` and `delta` still apply when no `pinney` block is given.
    fn custom(
        file: &ConfigFile,
        g_im: f64,
        level_splitting: f64,
        omega1: Option<f64>,
        kappa: Option<f64>,
    ) -> CliResult<CustomSpec> {
        let p = &file.pinney;
        let r0 = match (p.r0_re, p.r0_im) {
            (None, None) => -C64::i() * C64::new(require(file.g_re, "g-re")?, g_im).conj(),
            (re, im) => C64::new(require(Some(re.unwrap_or(0.0)), "r0-re")?, require(Some(im.unwrap_or(0.0)), "r0-im")?),
        };
        let r0_prime = match (p.r0_prime_re, p.r0_prime_im) {
            (None, None) => C64::i() * require(file.delta, "delta")? * r0,
            (re, im) => C64::new(
                require(Some(re.unwrap_or(0.0)), "r0p-re")?,
                require(Some(im.unwrap_or(0.0)), "r0p-im")?,
            ),
        };
        let constants = match (p.c1, p.c2) {
            (None, None) => None,
            (c1, c2) => Some((require(c1, "c1")?, require(Some(c2.unwrap_or(0.0)), "c2")?)),
        };
        if r0 == C64::new(0.0, 0.0) {
            return Err(CliError::Usage("the custom family needs a non-zero R₀".into()));
        }
        Ok(CustomSpec { r0, r0_prime, omega1, kappa, constants, level_splitting })
    }

    pub fn wants(&self, kind: OutputKind) -> bool {
        self.outputs.contains(&kind)
    }
}
