//! Run reports and their serializations.
//!
//! The structured record is the artifact of record: versioned JSON whose
//! float fields survive a parse round-trip bit for bit. Wall-clock
//! timings never enter it; they go to stderr, so re-running a scenario
//! with the same master seed reproduces the record byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use sensornet_core::metrology::QfiResult;
use sensornet_core::sensing::{EstimateReport, PrivacyAuditReport};
use sensornet_core::verification::{SymmetrisedBounds, TestRecord, VerificationOutcome};

use crate::config::{ReportFormat, ResolvedScenario};

/// Bump on any schema change to the structured record.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: u32,
    pub command: String,
    pub scenario: ResolvedScenario,
    pub repetitions: Vec<RepetitionReport>,
    pub aggregate: AggregateStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    /// Seed this repetition's streams were derived from.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensing: Option<EstimateReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyAuditReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qfi: Option<QfiReportBody>,
}

/// Numeric mirror of a verification outcome; the surviving quantum state
/// stays in memory, everything reportable lands here.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub accepted: bool,
    pub average_failure_rate: f64,
    pub honest_reduced_fidelity: f64,
    pub fidelity_bound: f64,
    pub soundness_probability: f64,
    pub bounds_applicable: bool,
    pub constraint_violations: Vec<String>,
    pub symmetrised: Option<SymmetrisedBounds>,
    pub effective_n: usize,
    pub threshold: f64,
    pub n_test: usize,
    pub n_total: usize,
    pub copies_tested: usize,
    pub copies_discarded: usize,
    pub target_copy_index: usize,
    pub per_generator_failures: Vec<f64>,
    pub set_verifiers: Option<Vec<usize>>,
}

impl From<&VerificationOutcome> for VerificationSummary {
    fn from(o: &VerificationOutcome) -> Self {
        Self {
            accepted: o.accepted,
            average_failure_rate: o.transcript.average_failure_rate,
            honest_reduced_fidelity: o.honest_reduced_fidelity,
            fidelity_bound: o.fidelity_bound,
            soundness_probability: o.soundness_probability,
            bounds_applicable: o.bounds_applicable,
            constraint_violations: o.constraint_violations.clone(),
            symmetrised: o.symmetrised,
            effective_n: o.effective_n,
            threshold: o.threshold,
            n_test: o.transcript.n_test,
            n_total: o.transcript.n_total,
            copies_tested: o.transcript.copies_tested,
            copies_discarded: o.transcript.copies_discarded,
            target_copy_index: o.transcript.target_copy_index,
            per_generator_failures: o.transcript.per_generator_failures.clone(),
            set_verifiers: o.transcript.set_verifiers.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QfiReportBody {
    pub n_qubits: usize,
    pub qfi: QfiResult,
    /// Independent finite-difference route over the fidelity, reported
    /// alongside so a record carries its own cross-check.
    pub bures_oracle: QfiResult,
    pub bures_step: f64,
    /// qfi / n^2; 1.0 is the Heisenberg ceiling for phase-sum sensing.
    pub heisenberg_ratio: f64,
    pub cramer_rao_single_round: Option<f64>,
    /// At the configured sensing round count, when one is configured.
    pub cramer_rao_at_rounds: Option<f64>,
}

/// Order-independent summary over repetitions. Fields stay None when the
/// command that produced the report has no such quantity.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AggregateStats {
    pub repetitions: usize,
    pub acceptance_rate: Option<f64>,
    pub mean_failure_rate: Option<f64>,
    pub std_failure_rate: Option<f64>,
    pub mean_fidelity: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub std_estimate: Option<f64>,
    pub mean_squared_error: Option<f64>,
    pub mean_privacy_epsilon: Option<f64>,
    pub within_ceiling_rate: Option<f64>,
}

pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Per-test log for one repetition; serialized as JSONL, never embedded
/// in the structured record.
#[derive(Debug, Clone)]
pub struct PerTestLog {
    pub repetition: usize,
    pub records: Vec<TestRecord>,
    pub target: TargetLine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetLine {
    pub target_copy_index: usize,
    pub honest_reduced_fidelity: f64,
    pub accepted: bool,
}

#[derive(Serialize)]
enum LogEntry<'a> {
    #[serde(rename = "test")]
    Test(&'a TestRecord),
    #[serde(rename = "target")]
    Target(&'a TargetLine),
}

pub fn render_structured_record(report: &RunReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn parse_structured_record(text: &str) -> Result<RunReport> {
    serde_json::from_str(text).context("structured record parse failed")
}

fn render_per_test_log(log: &PerTestLog) -> Result<String> {
    let mut out = String::new();
    for record in &log.records {
        out.push_str(&serde_json::to_string(&LogEntry::Test(record))?);
        out.push('\n');
    }
    out.push_str(&serde_json::to_string(&LogEntry::Target(&log.target))?);
    out.push('\n');
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn render_summary_table(report: &RunReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "repetition",
        "seed",
        "accepted",
        "failure_rate",
        "fidelity",
        "fidelity_bound",
        "soundness_probability",
        "estimate",
        "true_value",
        "bias_vs_truth",
        "rounds_used",
        "rounds_discarded",
        "privacy_epsilon_measured",
        "privacy_epsilon_ceiling",
        "within_ceiling",
        "qfi",
        "qfi_bures",
    ])?;
    for rep in &report.repetitions {
        let v = rep.verification.as_ref();
        let s = rep.sensing.as_ref();
        let p = rep.privacy.as_ref();
        let q = rep.qfi.as_ref();
        let accepted = v
            .map(|v| v.accepted)
            .or(p.map(|p| p.accepted))
            .map(|b| b.to_string())
            .unwrap_or_default();
        w.write_record([
            rep.repetition.to_string(),
            rep.seed.to_string(),
            accepted,
            opt(v.map(|v| v.average_failure_rate)
                .or(s.map(|s| s.mean_accepted_failure_rate))
                .or(p.map(|p| p.verification_failure_rate))),
            opt(v.map(|v| v.honest_reduced_fidelity)
                .or(p.map(|p| p.honest_reduced_fidelity))),
            opt(v.map(|v| v.fidelity_bound)),
            opt(v.map(|v| v.soundness_probability)
                .or(s.map(|s| s.soundness_probability))),
            opt(s.map(|s| s.estimate)),
            opt(s.map(|s| s.true_value)),
            opt(s.map(|s| s.bias_vs_truth)),
            s.map(|s| s.rounds_used.to_string()).unwrap_or_default(),
            s.map(|s| s.rounds_discarded.to_string()).unwrap_or_default(),
            opt(p.map(|p| p.measured.epsilon)),
            opt(p.map(|p| p.guarantee.eps_definition)),
            p.map(|p| p.within_ceiling.to_string()).unwrap_or_default(),
            opt(q.map(|q| q.qfi.value)),
            opt(q.map(|q| q.bures_oracle.value)),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Write the requested formats. Without an output directory the record
/// goes to stdout (resolution already rejected other formats in that
/// case). Returns the files written.
pub fn emit(
    report: &RunReport,
    per_test_logs: &[PerTestLog],
    record_basename: &str,
) -> Result<Vec<PathBuf>> {
    let formats = &report.scenario.output.formats;
    let dir = report.scenario.output.directory.as_ref().map(PathBuf::from);
    let mut written = Vec::new();

    let Some(dir) = dir else {
        print!("{}", render_structured_record(report)?);
        return Ok(written);
    };
    fs::create_dir_all(&dir).with_fmt_context(&dir)?;

    for format in formats {
        match format {
            ReportFormat::StructuredRecord => {
                let path = dir.join(format!("{record_basename}.json"));
                fs::write(&path, render_structured_record(report)?).with_fmt_context(&path)?;
                written.push(path);
            }
            ReportFormat::SummaryTable => {
                let path = dir.join(format!("{record_basename}_summary.csv"));
                fs::write(&path, render_summary_table(report)?).with_fmt_context(&path)?;
                written.push(path);
            }
            ReportFormat::PerTestLog => {
                for log in per_test_logs {
                    let path =
                        dir.join(format!("{record_basename}_tests_rep{:03}.jsonl", log.repetition));
                    fs::write(&path, render_per_test_log(log)?).with_fmt_context(&path)?;
                    written.push(path);
                }
            }
        }
    }
    Ok(written)
}

trait IoContext<T> {
    fn with_fmt_context(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn with_fmt_context(self, path: &Path) -> Result<T> {
        self.with_context(|| format!("writing {}", path.display()))
    }
}
