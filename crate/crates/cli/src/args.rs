use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{AxisSpec, ConfigFile, FamilyName, OutputKind};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "ermakov", version, about = "Exactly solvable driven two-level systems built from Ermakov solutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Driving field and factorizing functions on a time grid (CSV).
    Synth(RunArgs),
    /// State amplitudes and population inversion for ψ₀ = |p⟩ (CSV).
    Evolve(RunArgs),
    /// Compare the closed-form propagator with numerical integration (JSON report).
    Verify(RunArgs),
    /// Periodicity and inversion summary over a parameter grid (CSV).
    Scan(ScanArgs),
}

/// Model and numerics flags shared by all subcommands. Flags override values
/// read from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    /// Real part of the coupling g.
    #[arg(long, allow_negative_numbers = true)]
    pub g_re: Option<f64>,
    /// Imaginary part of the coupling g.
    #[arg(long, allow_negative_numbers = true)]
    pub g_im: Option<f64>,
    /// Detuning δ.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Level splitting Δ.
    #[arg(long = "Delta", alias = "level-splitting", allow_negative_numbers = true)]
    pub level_splitting: Option<f64>,
    /// Oscillator frequency Ω₁.
    #[arg(long, conflicts_with = "kappa")]
    pub omega1: Option<f64>,
    /// Frequency ratio κ = Ω₀/Ω₁.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// End of the time window (default: five characteristic periods).
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Number of grid points, at least 2.
    #[arg(long)]
    pub points: Option<usize>,
    /// Largest period multiple searched for a closed trajectory.
    #[arg(long)]
    pub max_p: Option<u32>,
    /// Limit on the closed-form vs. numerical propagator difference.
    #[arg(long)]
    pub tol_propagator: Option<f64>,
    /// Limit on the unitarity defect of the closed form.
    #[arg(long)]
    pub tol_unitarity: Option<f64>,
    /// Limit on the Ermakov residual.
    #[arg(long)]
    pub tol_ermakov: Option<f64>,
    /// Limit on the Schrödinger residual of the closed form.
    #[arg(long)]
    pub tol_schrodinger: Option<f64>,
    /// Integrator absolute tolerance.
    #[arg(long)]
    pub tol_abs: Option<f64>,
    /// Integrator relative tolerance.
    #[arg(long)]
    pub tol_rel: Option<f64>,
    /// custom-pinney: Re R(0).
    #[arg(long, allow_negative_numbers = true)]
    pub r0_re: Option<f64>,
    /// custom-pinney: Im R(0).
    #[arg(long, allow_negative_numbers = true)]
    pub r0_im: Option<f64>,
    /// custom-pinney: Re R'(0).
    #[arg(long = "r0p-re", allow_negative_numbers = true)]
    pub r0_prime_re: Option<f64>,
    /// custom-pinney: Im R'(0).
    #[arg(long = "r0p-im", allow_negative_numbers = true)]
    pub r0_prime_im: Option<f64>,
    /// custom-pinney: Pinney constant c₁ (default: normalized μ(0) = 1).
    #[arg(long)]
    pub c1: Option<f64>,
    /// custom-pinney: Pinney constant c₂.
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    /// Multiplies the closed-form α by this factor before verification.
    #[arg(long, hide = true)]
    pub inject_alpha_fault: Option<f64>,
}

impl ModelArgs {
    /// The config file, if any, with every flag that was given written over it.
    pub fn merged(&self) -> CliResult<ConfigFile> {
        let mut file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        fn set<T: Copy>(slot: &mut Option<T>, flag: Option<T>) {
            if flag.is_some() {
                *slot = flag;
            }
        }
        set(&mut file.family, self.family);
        set(&mut file.g_re, self.g_re);
        set(&mut file.g_im, self.g_im);
        set(&mut file.delta, self.delta);
        set(&mut file.level_splitting, self.level_splitting);
        set(&mut file.t_max, self.t_max);
        set(&mut file.points, self.points);
        set(&mut file.max_p, self.max_p);
        if let Some(w) = self.omega1 {
            file.set_omega1(w);
        }
        if let Some(k) = self.kappa {
            file.set_kappa(k);
        }
        let tol = &mut file.tolerances;
        set(&mut tol.propagator, self.tol_propagator);
        set(&mut tol.unitarity, self.tol_unitarity);
        set(&mut tol.ermakov, self.tol_ermakov);
        set(&mut tol.schrodinger, self.tol_schrodinger);
        set(&mut tol.abs, self.tol_abs);
        set(&mut tol.rel, self.tol_rel);
        let p = &mut file.pinney;
        set(&mut p.r0_re, self.r0_re);
        set(&mut p.r0_im, self.r0_im);
        set(&mut p.r0_prime_re, self.r0_prime_re);
        set(&mut p.r0_prime_im, self.r0_prime_im);
        set(&mut p.c1, self.c1);
        set(&mut p.c2, self.c2);
        Ok(file)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated column groups and reports to produce.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub outputs: Option<Vec<OutputKind>>,
    /// Where `--outputs verify` writes its report (default: `<out>.report.json`,
    /// or standard error without `--out`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Scan axes take `a,b,c` or `from:to:steps`. Axes not given stay at the base
/// value; the product of all axes may hold at most 10⁴ cells.
#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub scan_g_re: Option<AxisSpec>,
    #[arg(long, allow_hyphen_values = true)]
    pub scan_g_im: Option<AxisSpec>,
    #[arg(long, allow_hyphen_values = true)]
    pub scan_delta: Option<AxisSpec>,
    #[arg(long = "scan-Delta", allow_hyphen_values = true)]
    pub scan_level_splitting: Option<AxisSpec>,
    #[arg(long, conflicts_with = "scan_kappa")]
    pub scan_omega1: Option<AxisSpec>,
    #[arg(long)]
    pub scan_kappa: Option<AxisSpec>,
}

impl ScanArgs {
    pub fn merged(&self) -> CliResult<ConfigFile> {
        let mut file = self.model.merged()?;
        let scan = &mut file.scan;
        for (slot, flag) in [
            (&mut scan.g_re, &self.scan_g_re),
            (&mut scan.g_im, &self.scan_g_im),
            (&mut scan.delta, &self.scan_delta),
            (&mut scan.level_splitting, &self.scan_level_splitting),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if self.scan_omega1.is_some() {
            scan.omega1.clone_from(&self.scan_omega1);
            scan.kappa = None;
        }
        if self.scan_kappa.is_some() {
            scan.kappa.clone_from(&self.scan_kappa);
            scan.omega1 = None;
        }
        Ok(file)
    }
}
