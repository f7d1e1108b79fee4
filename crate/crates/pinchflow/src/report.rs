//! Report artifacts: JSON verification reports with embedded configuration,
//! CSV tables for per-sample evidence, flow trajectories, and PDE monitors,
//! and aggregation of many report files into one summary.
//!
//! Artifacts are byte-deterministic for a fixed (config, seed): floats are
//! rendered with Rust's shortest round-trip formatting, report timing fields
//! are zeroed at the source, and summary rows are sorted lexicographically.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::equivariant::Trajectory;
use crate::lab::{SampleRow, VerificationReport};
use crate::pde::PdeMonitorRow;

pub const LEMMA_CSV_HEADER: &str = "lemma_id,n,m,kbar,eps,x,p2,lhs,rhs,slack,pass";
pub const TRAJECTORY_CSV_HEADER: &str = "t,phi,a2,h2,f,ratio,pinched";
pub const PDE_CSV_HEADER: &str = "step,t,max_A2,max_H2,grad_ratio,codim_ratio,cyl_ratio";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed report {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("no readable reports among {total} input files")]
    AllSkipped { total: usize },
    #[error("empty input list")]
    EmptyInput,
}

/// The on-disk JSON artifact: the fully resolved run configuration plus the
/// verification reports it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub config: Value,
    pub reports: Vec<VerificationReport>,
}

pub fn render_report_artifact(config: &Value, reports: &[VerificationReport]) -> String {
    let artifact = ReportArtifact { config: config.clone(), reports: reports.to_vec() };
    let mut text = serde_json::to_string_pretty(&artifact).expect("reports are serializable");
    text.push('\n');
    text
}

pub fn write_report_artifact(
    path: &Path,
    config: &Value,
    reports: &[VerificationReport],
) -> Result<(), ReportError> {
    fs::write(path, render_report_artifact(config, reports))
        .map_err(|source| ReportError::Io { path: path.display().to_string(), source })
}

pub fn read_report_artifact(path: &Path) -> Result<ReportArtifact, ReportError> {
    let text = fs::read_to_string(path)
        .map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| ReportError::Malformed {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn render_lemma_csv(rows: &[SampleRow]) -> String {
    let mut out = String::from(LEMMA_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.lemma_id, r.n, r.m, r.kbar, r.eps, r.x, r.p2, r.lhs, r.rhs, r.slack, r.pass
        )
        .unwrap();
    }
    out
}

pub fn render_trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for m in &traj.monitors {
        writeln!(out, "{},{},{},{},{},{},{}", m.t, m.phi, m.a2, m.h2, m.f, m.ratio, m.pinched)
            .unwrap();
    }
    out
}

pub fn render_pde_csv(rows: &[PdeMonitorRow]) -> String {
    let mut out = String::from(PDE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step, r.t, r.max_a2, r.max_h2, r.grad_ratio, r.codim_ratio, r.cyl_ratio
        )
        .unwrap();
    }
    out
}

/// One aggregated summary line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub lemma_id: String,
    pub samples: u64,
    pub violations: u64,
    pub min_slack: f64,
    pub pass: bool,
}

/// Result of aggregating many report files.
#[derive(Debug, Clone)]
pub struct Aggregate {
    /// Rows in lexicographic `lemma_id` order.
    pub rows: Vec<SummaryRow>,
    /// Human-readable warnings for files that were skipped as malformed.
    pub warnings: Vec<String>,
}

impl Aggregate {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Reads every report file, skipping malformed ones with a warning, and
/// merges all reports into one lexicographically sorted summary. Fails if
/// the input list is empty or nothing could be read.
pub fn aggregate(paths: &[impl AsRef<Path>]) -> Result<Aggregate, ReportError> {
    if paths.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for p in paths {
        match read_report_artifact(p.as_ref()) {
            Ok(artifact) => {
                for r in artifact.reports {
                    rows.push(SummaryRow {
                        pass: r.passed(),
                        lemma_id: r.lemma_id,
                        samples: r.samples,
                        violations: r.violations,
                        min_slack: r.min_slack,
                    });
                }
            }
            Err(e) => warnings.push(format!("skipping: {e}")),
        }
    }
    if rows.is_empty() && warnings.len() == paths.len() {
        return Err(ReportError::AllSkipped { total: paths.len() });
    }
    rows.sort_by(|a, b| a.lemma_id.cmp(&b.lemma_id));
    Ok(Aggregate { rows, warnings })
}

pub fn render_summary(agg: &Aggregate) -> String {
    let mut out = String::from("lemma_id,samples,violations,min_slack,pass\n");
    for r in &agg.rows {
        writeln!(out, "{},{},{},{},{}", r.lemma_id, r.samples, r.violations, r.min_slack, r.pass)
            .unwrap();
    }
    out
}
