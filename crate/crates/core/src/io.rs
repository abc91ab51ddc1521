//! CSV and JSON writers for run outputs, and the distribution reader used by
//! the `fit` subcommand.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::analysis::{GaussianPeak, MomentumDistribution};
use crate::basis::MomentumGrid;
use crate::error::{Error, Result};
use crate::propagation::Trajectory;
use crate::scenario::RunReport;

pub const DISTRIBUTION_HEADER: &str = "p_over_hbark,density";

/// One row per snapshot: time, trace, boundary loss, both dark populations,
/// then the momentum distribution with one column per grid point.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("gamma_t,trace,lost_trace,pop_dark_lambda,pop_dark_iw");
    for p in traj.grid.values() {
        write!(out, ",n({p})").unwrap();
    }
    out.push('\n');
    for s in &traj.snapshots {
        write!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", s.gamma_t, s.trace, s.lost_trace, s.dark_lambda, s.dark_iw)
            .unwrap();
        for v in &s.distribution {
            write!(out, ",{v:.16e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn distribution_csv(dist: &MomentumDistribution) -> String {
    let mut out = format!("{DISTRIBUTION_HEADER}\n");
    for (p, n) in dist.momenta().iter().zip(&dist.density) {
        writeln!(out, "{p:.16e},{n:.16e}").unwrap();
    }
    out
}

#[derive(Serialize)]
struct StageFitRecord<'a> {
    stage: usize,
    gamma_t: f64,
    omega_plus: f64,
    omega_minus: f64,
    converged: bool,
    iterations: usize,
    residual_norm: f64,
    peaks: &'a [GaussianPeak],
}

pub fn peak_fits_json(report: &RunReport) -> String {
    let records: Vec<_> = report
        .stages
        .iter()
        .map(|s| StageFitRecord {
            stage: s.index,
            gamma_t: s.gamma_t,
            omega_plus: s.params.omega_plus,
            omega_minus: s.params.omega_minus,
            converged: s.fit.converged,
            iterations: s.fit.iterations,
            residual_norm: s.fit.residual_norm,
            peaks: &s.fit.peaks,
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&records).expect("plain data serializes");
    text.push('\n');
    text
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    Ok(std::fs::write(path, trajectory_csv(traj))?)
}

pub fn write_distribution(path: &Path, dist: &MomentumDistribution) -> Result<()> {
    Ok(std::fs::write(path, distribution_csv(dist))?)
}

pub fn write_peak_fits(path: &Path, report: &RunReport) -> Result<()> {
    Ok(std::fs::write(path, peak_fits_json(report))?)
}

/// Parses a two-column `p_over_hbark,density` file. The momenta must form a
/// symmetric grid with spacing 1/N for integer N.
pub fn parse_distribution_csv(text: &str) -> Result<MomentumDistribution> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == DISTRIBUTION_HEADER => {}
        other => return Err(Error::Parse(format!("expected header `{DISTRIBUTION_HEADER}`, found {other:?}"))),
    }
    let mut momenta = Vec::new();
    let mut density = Vec::new();
    for (row, line) in lines.enumerate() {
        let mut cols = line.split(',');
        let (Some(p), Some(n), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Parse(format!("row {}: expected two columns", row + 1)));
        };
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("row {}: `{}`: {e}", row + 1, s.trim())))
        };
        momenta.push(parse(p)?);
        density.push(parse(n)?);
    }
    if momenta.len() < 3 || momenta.len() % 2 == 0 {
        return Err(Error::Parse(format!("need an odd number of at least 3 rows, got {}", momenta.len())));
    }
    let spacing = momenta[1] - momenta[0];
    if !(spacing > 0.0) {
        return Err(Error::Parse("momenta must increase".into()));
    }
    let ppr = (1.0 / spacing).round();
    if ppr < 1.0 || (ppr * spacing - 1.0).abs() > 1e-6 {
        return Err(Error::Parse(format!("spacing {spacing} is not 1/N for an integer N")));
    }
    let grid = MomentumGrid::from_counts((momenta.len() - 1) / 2, ppr as usize)?;
    for (i, &p) in momenta.iter().enumerate() {
        if (p - grid.value(i)).abs() > 1e-6 * grid.spacing() {
            return Err(Error::Parse(format!("row {}: momentum {p} is off the symmetric grid", i + 1)));
        }
    }
    Ok(MomentumDistribution { grid, density })
}

pub fn read_distribution_csv(path: &Path) -> Result<MomentumDistribution> {
    parse_distribution_csv(&std::fs::read_to_string(path)?)
}
