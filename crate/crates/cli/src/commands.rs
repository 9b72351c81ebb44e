use std::path::{Path, PathBuf};

use ermakov_qubit::oracle::VerificationReport;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Command, RunArgs, ScanArgs};
use crate::config::{ConfigFile, OutputKind, RunConfig, MAX_SCAN_CELLS};
use crate::error::{CliError, CliResult};
use crate::model::{Model, RunSummary};
use crate::output::{self, summary_line, trajectory_header, trajectory_line, write_csv, write_text, SUMMARY_HEADER};

/// What a successful command reports back for the exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Verified { pass: bool },
}

#[derive(Debug, Serialize)]
pub struct ReportDocument<'a> {
    pub summary: &'a RunSummary,
    pub report: &'a VerificationReport,
}

pub fn execute(command: &Command) -> CliResult<Outcome> {
    match command {
        Command::Synth(args) => run(args, &[OutputKind::Field, OutputKind::Factorization]),
        Command::Evolve(args) => run(args, &[OutputKind::Field, OutputKind::State, OutputKind::Inversion]),
        Command::Verify(args) => verify(args),
        Command::Scan(args) => scan(args),
    }
}

fn report_json(model: &Model, run: &RunConfig, alpha_fault: Option<f64>) -> CliResult<(String, bool)> {
    let summary = model.summary(run.max_p)?;
    let report = model.verify(run, &run.thresholds, alpha_fault)?;
    let doc = ReportDocument { summary: &summary, report: &report };
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    Ok((text, report.pass))
}

fn run(args: &RunArgs, default_outputs: &[OutputKind]) -> CliResult<Outcome> {
    let mut file = args.model.merged()?;
    if let Some(outputs) = &args.outputs {
        file.outputs = Some(outputs.clone());
    }
    let run = RunConfig::resolve(&file, default_outputs)?;
    let model = Model::build(&run.model)?;
    let grid = model.grid(&run);
    let rows = output::trajectory(&model, &grid, run.wants(OutputKind::Factorization))?;
    let lines: Vec<String> = rows.par_iter().map(|row| trajectory_line(row, &run.outputs)).collect();
    write_csv(args.out.as_deref(), &trajectory_header(&run.outputs), &lines)?;
    if !run.wants(OutputKind::Verify) {
        return Ok(Outcome::Done);
    }
    let (text, pass) = report_json(&model, &run, args.model.inject_alpha_fault)?;
    match report_path(args) {
        Some(path) => write_text(Some(&path), &text)?,
        None => eprint!("{text}"),
    }
    Ok(Outcome::Verified { pass })
}

fn report_path(args: &RunArgs) -> Option<PathBuf> {
    args.report.clone().or_else(|| {
        args.out.as_ref().map(|out| {
            let mut name = out.as_os_str().to_owned();
            name.push(".report.json");
            PathBuf::from(name)
        })
    })
}

fn verify(args: &RunArgs) -> CliResult<Outcome> {
    let run = RunConfig::resolve(&args.model.merged()?, &[OutputKind::Verify])?;
    let model = Model::build(&run.model)?;
    let (text, pass) = report_json(&model, &run, args.model.inject_alpha_fault)?;
    write_text(args.out.as_deref().or(args.report.as_deref()), &text)?;
    Ok(Outcome::Verified { pass })
}

/// Base configuration with every combination of scan-axis values substituted;
/// the last axis varies fastest.
pub fn scan_cells(base: &ConfigFile) -> CliResult<Vec<ConfigFile>> {
    type Setter = fn(&mut ConfigFile, f64);
    let s = &base.scan;
    let axes: [(Option<&crate::config::AxisSpec>, Setter); 6] = [
        (s.g_re.as_ref(), |c, x| c.g_re = Some(x)),
        (s.g_im.as_ref(), |c, x| c.g_im = Some(x)),
        (s.delta.as_ref(), |c, x| c.delta = Some(x)),
        (s.level_splitting.as_ref(), |c, x| c.level_splitting = Some(x)),
        (s.omega1.as_ref(), ConfigFile::set_omega1),
        (s.kappa.as_ref(), ConfigFile::set_kappa),
    ];
    if s.omega1.is_some() && s.kappa.is_some() {
        return Err(CliError::Usage("scan either omega1 or kappa, not both".into()));
    }
    let mut cells = vec![base.clone()];
    for (axis, set) in axes {
        let Some(axis) = axis else { continue };
        let values = axis.values()?;
        if cells.len().saturating_mul(values.len()) > MAX_SCAN_CELLS {
            return Err(CliError::Usage(format!("scan grid exceeds {MAX_SCAN_CELLS} cells")));
        }
        cells = cells
            .iter()
            .flat_map(|cell| {
                values.iter().map(move |&x| {
                    let mut next = cell.clone();
                    set(&mut next, x);
                    next
                })
            })
            .collect();
    }
    Ok(cells)
}

pub fn scan_summaries(base: &ConfigFile) -> CliResult<Vec<RunSummary>> {
    let cells = scan_cells(base)?;
    let runs = cells.iter().map(|c| RunConfig::resolve(c, &[])).collect::<CliResult<Vec<_>>>()?;
    runs.par_iter()
        .map(|run| Model::build(&run.model).and_then(|m| m.summary(run.max_p)))
        .collect()
}

fn scan(args: &ScanArgs) -> CliResult<Outcome> {
    let summaries = scan_summaries(&args.merged()?)?;
    let lines: Vec<String> = summaries.iter().map(summary_line).collect();
    write_csv(args.out.as_deref().map(Path::new), &SUMMARY_HEADER, &lines)?;
    Ok(Outcome::Done)
}
