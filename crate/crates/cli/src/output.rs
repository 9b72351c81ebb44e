//! CSV rows. Numbers are written with 17 significant digits so that output
//! is byte-identical across runs and parses back to the same doubles.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ermakov_qubit::factorization::Factors;
use ermakov_qubit::C64;
use rayon::prelude::*;

use crate::config::OutputKind;
use crate::error::{CliError, CliResult};
use crate::model::{Model, RunSummary};

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_owned(), num)
}

/// One sample of a trajectory, with the initial state `|p⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub r: C64,
    pub v: C64,
    pub factors: Option<Factors>,
    pub mu: f64,
    pub eta: f64,
    /// `|c_p|²`.
    pub pop_p: f64,
    /// `|c_q|²`.
    pub pop_q: f64,
    /// `|c_p|² − |c_q|²`.
    pub inversion: f64,
    /// `‖U†U − 𝕀‖` of the propagator the state was taken from.
    pub unitarity_defect: f64,
}

pub fn trajectory(model: &Model, grid: &[f64], with_factors: bool) -> CliResult<Vec<TrajectoryRow>> {
    let factors = if with_factors { model.factors(grid) } else { vec![None; grid.len()] };
    grid.par_iter()
        .zip(factors)
        .map(|(&t, factors)| {
            let (r, v) = model.field(t);
            let u = model.propagator(t)?;
            let (cp, cq) = (u.get(0, 0), u.get(1, 0));
            let (pop_p, pop_q) = (cp.norm_sqr(), cq.norm_sqr());
            Ok(TrajectoryRow {
                t,
                r,
                v,
                factors,
                mu: model.mu(t),
                eta: model.eta(t)?,
                pop_p,
                pop_q,
                inversion: pop_p - pop_q,
                unitarity_defect: u.unitarity_defect(),
            })
        })
        .collect()
}

pub fn trajectory_header(outputs: &[OutputKind]) -> Vec<&'static str> {
    let mut cols = vec!["t"];
    for kind in outputs {
        cols.extend_from_slice(match kind {
            OutputKind::Field => &["re_r", "im_r", "abs_r", "re_v", "im_v"][..],
            OutputKind::Factorization => {
                &["re_alpha", "im_alpha", "re_delta_f", "im_delta_f", "re_beta", "im_beta", "mu", "eta"][..]
            }
            OutputKind::State => &["pop_p", "pop_q"][..],
            OutputKind::Inversion => &["inversion"][..],
            OutputKind::Verify => &[][..],
        });
    }
    if outputs.contains(&OutputKind::State) {
        cols.push("unitarity_defect");
    }
    cols
}

pub fn trajectory_line(row: &TrajectoryRow, outputs: &[OutputKind]) -> String {
    let mut cells = vec![num(row.t)];
    for kind in outputs {
        match kind {
            OutputKind::Field => {
                cells.extend([row.r.re, row.r.im, row.r.norm(), row.v.re, row.v.im].map(num));
            }
            OutputKind::Factorization => {
                let f = row.factors.unwrap_or(Factors::new(
                    C64::new(f64::NAN, f64::NAN),
                    C64::new(f64::NAN, f64::NAN),
                    C64::new(f64::NAN, f64::NAN),
                ));
                cells.extend(
                    [f.alpha.re, f.alpha.im, f.delta_f.re, f.delta_f.im, f.beta.re, f.beta.im, row.mu, row.eta]
                        .map(num),
                );
            }
            OutputKind::State => cells.extend([row.pop_p, row.pop_q].map(num)),
            OutputKind::Inversion => cells.push(num(row.inversion)),
            OutputKind::Verify => {}
        }
    }
    if outputs.contains(&OutputKind::State) {
        cells.push(num(row.unitarity_defect));
    }
    cells.join(",")
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "family",
    "g_re",
    "g_im",
    "delta",
    "level_splitting",
    "omega0",
    "omega1",
    "kappa",
    "p",
    "tau_p",
    "p_min",
    "p_period",
];

pub fn summary_line(s: &RunSummary) -> String {
    [
        s.family.clone(),
        num(s.g_re),
        num(s.g_im),
        num(s.delta),
        num(s.level_splitting),
        num(s.omega0),
        opt_num(s.omega1),
        opt_num(s.kappa),
        s.p.map_or_else(|| "none".to_owned(), |p| p.to_string()),
        opt_num(s.tau_p),
        opt_num(s.p_min),
        opt_num(s.p_period),
    ]
    .join(",")
}

/// Writes `header` and `lines` as one CSV document to `path`, or to standard
/// output when `path` is `None`.
pub fn write_csv<S: AsRef<str>>(path: Option<&Path>, header: &[&str], lines: &[S]) -> CliResult<()> {
    let mut text = String::with_capacity(64 * (lines.len() + 1));
    text.push_str(&header.join(","));
    text.push('\n');
    for line in lines {
        text.push_str(line.as_ref());
        text.push('\n');
    }
    write_text(path, &text)
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    let display = path.map_or_else(|| "<stdout>".to_owned(), |p| p.display().to_string());
    let io_err = |source: io::Error| CliError::Io { path: display.clone(), source };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(io_err)?);
            w.write_all(text.as_bytes()).and_then(|()| w.flush()).map_err(io_err)
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|()| out.flush()).map_err(io_err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456.789, f64::MIN_POSITIVE, 5f64.sqrt()] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn header_matches_line() {
        let row = TrajectoryRow {
            t: 0.5,
            r: C64::new(1.0, 2.0),
            v: C64::new(3.0, 4.0),
            factors: None,
            mu: 1.0,
            eta: 0.5,
            pop_p: 0.75,
            pop_q: 0.25,
            inversion: 0.5,
            unitarity_defect: 0.0,
        };
        let all = [
            OutputKind::Field,
            OutputKind::Factorization,
            OutputKind::State,
            OutputKind::Inversion,
            OutputKind::Verify,
        ];
        for k in 0..all.len() {
            let outputs = &all[..=k];
            assert_eq!(trajectory_header(outputs).len(), trajectory_line(&row, outputs).split(',').count());
        }
    }
}
