//! Scenario execution. Repetitions run in parallel; each one derives its
//! own seed from the master by repetition index, so the report is a pure
//! function of (config, master seed) whatever the thread count.

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use sensornet_core::encoding::{self};
use sensornet_core::ghz;
use sensornet_core::metrology::{self, ParameterizedFamily};
use sensornet_core::qcore::{C64, QuantumState};
use sensornet_core::rng::{self, label};
use sensornet_core::sensing;
use sensornet_core::tol;
use sensornet_core::verification::{self, RunOptions};

use crate::config::{ReportFormat, ResolvedScenario, StateFamilyConfig};
use crate::report::{
    mean_std, AggregateStats, PerTestLog, QfiReportBody, RepetitionReport, RunReport, TargetLine,
    VerificationSummary, ARTIFACT_VERSION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Verify,
    Sense,
    PrivacyAudit,
    Qfi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Sense => "sense",
            Command::PrivacyAudit => "privacy-audit",
            Command::Qfi => "qfi",
        }
    }
}

pub struct ScenarioRun {
    pub report: RunReport,
    pub per_test_logs: Vec<PerTestLog>,
}

pub fn rep_seed(master: u64, repetition: usize) -> u64 {
    rng::derive_seed(master, &[label::REP, repetition as u64])
}

pub fn run_scenario(scenario: &ResolvedScenario, command: Command) -> Result<ScenarioRun> {
    match command {
        Command::Verify => run_verify(scenario),
        Command::Sense => run_sense(scenario),
        Command::PrivacyAudit => run_privacy_audit(scenario),
        Command::Qfi => run_qfi(scenario),
    }
}

/// Verification of the configured function's resource. For the default
/// averaging function this is the standard one-qubit-per-node protocol;
/// weighted functions verify their conjugated stabilizers instead.
fn run_verify(scenario: &ResolvedScenario) -> Result<ScenarioRun> {
    let topo = scenario.topology()?;
    let model = scenario.adversary_model()?;
    let params = scenario.verification.clone();
    verification::check_protocol_shape(params.lambda, &topo)?;
    let (resource, assignment) = encoding::resource_state_for_function(&scenario.function)?;
    let stabilizers = ghz::stabilizer_generators(resource.n_qubits())?
        .conjugate_by_x(&assignment.x_flags())?;
    let want_log = scenario
        .output
        .formats
        .contains(&ReportFormat::PerTestLog);
    let options = RunOptions {
        record_tests: want_log,
    };

    let reps: Vec<(RepetitionReport, Option<PerTestLog>)> = (0..scenario.seeds.repetitions)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let seed = rep_seed(scenario.seeds.master, i);
            let outcome = verification::run_resource_verification(
                &params,
                &topo,
                &model,
                &resource,
                &assignment,
                &stabilizers,
                seed,
                &[],
                &options,
            )
            .with_context(|| format!("verification repetition {i}"))?;
            let log = want_log.then(|| PerTestLog {
                repetition: i,
                records: outcome.transcript.records.clone(),
                target: TargetLine {
                    target_copy_index: outcome.transcript.target_copy_index,
                    honest_reduced_fidelity: outcome.honest_reduced_fidelity,
                    accepted: outcome.accepted,
                },
            });
            let rep = RepetitionReport {
                repetition: i,
                seed,
                verification: Some(VerificationSummary::from(&outcome)),
                sensing: None,
                privacy: None,
                qfi: None,
            };
            Ok((rep, log))
        })
        .collect::<Result<_>>()?;

    let (reports, logs): (Vec<_>, Vec<_>) = reps.into_iter().unzip();
    let aggregate = aggregate_verify(&reports);
    Ok(ScenarioRun {
        report: assemble(scenario, Command::Verify, reports, aggregate),
        per_test_logs: logs.into_iter().flatten().collect(),
    })
}

fn run_sense(scenario: &ResolvedScenario) -> Result<ScenarioRun> {
    let topo = scenario.topology()?;
    let model = scenario.adversary_model()?;
    let params = scenario.sensing_params()?;

    let reports: Vec<RepetitionReport> = (0..scenario.seeds.repetitions)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let seed = rep_seed(scenario.seeds.master, i);
            let estimate = sensing::run_sensing_protocol(&params, &topo, &model, seed)
                .with_context(|| format!("sensing repetition {i}"))?;
            Ok(RepetitionReport {
                repetition: i,
                seed,
                verification: None,
                sensing: Some(estimate),
                privacy: None,
                qfi: None,
            })
        })
        .collect::<Result<_>>()?;

    let aggregate = aggregate_sense(&reports);
    Ok(ScenarioRun {
        report: assemble(scenario, Command::Sense, reports, aggregate),
        per_test_logs: Vec::new(),
    })
}

fn run_privacy_audit(scenario: &ResolvedScenario) -> Result<ScenarioRun> {
    let topo = scenario.topology()?;
    let model = scenario.adversary_model()?;
    // The audit reuses the sensing parameter bundle; a config without
    // [sensing] audits a single-round protocol.
    let params = match scenario.sensing {
        Some(_) => scenario.sensing_params()?,
        None => {
            let mut p = sensing::SensingParams::new(
                1,
                scenario.verification.clone(),
                scenario.function.clone(),
                scenario.phase_vector(),
            )?;
            p.branch_window = crate::config::DEFAULT_BRANCH_WINDOW;
            p
        }
    };

    let reports: Vec<RepetitionReport> = (0..scenario.seeds.repetitions)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let seed = rep_seed(scenario.seeds.master, i);
            let audit = sensing::empirical_privacy_audit(&params, &topo, &model, seed)
                .with_context(|| format!("privacy audit repetition {i}"))?;
            Ok(RepetitionReport {
                repetition: i,
                seed,
                verification: None,
                sensing: None,
                privacy: Some(audit),
                qfi: None,
            })
        })
        .collect::<Result<_>>()?;

    let aggregate = aggregate_privacy(&reports);
    Ok(ScenarioRun {
        report: assemble(scenario, Command::PrivacyAudit, reports, aggregate),
        per_test_logs: Vec::new(),
    })
}

fn run_qfi(scenario: &ResolvedScenario) -> Result<ScenarioRun> {
    let qfi_cfg = scenario
        .qfi
        .as_ref()
        .ok_or_else(|| anyhow!("the qfi command needs a [qfi] section in the config"))?;

    let (state, assignment) = match &qfi_cfg.state {
        StateFamilyConfig::Ghz { n } => (
            ghz::ghz_state(*n)?,
            encoding::QubitAssignment::one_per_node(*n),
        ),
        StateFamilyConfig::DephasedGhz { n, coherence } => (
            ghz::dephased_ghz(*n, *coherence)?,
            encoding::QubitAssignment::one_per_node(*n),
        ),
        StateFamilyConfig::PlusProduct { n } => {
            let dim = 1usize << n;
            let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
            (
                QuantumState::pure_from_slice(&vec![amp; dim])?,
                encoding::QubitAssignment::one_per_node(*n),
            )
        }
        StateFamilyConfig::FunctionResource => {
            encoding::resource_state_for_function(&scenario.function)?
        }
    };
    let n_qubits = state.n_qubits();
    let family =
        ParameterizedFamily::along_direction(state, &assignment, &qfi_cfg.direction)?;

    let qfi = metrology::qfi_auto(&family, tol::QFI_TRUNCATION_TOL)?;
    let bures = metrology::qfi_bures_oracle(&family, qfi_cfg.bures_step)?;
    let body = QfiReportBody {
        n_qubits,
        heisenberg_ratio: qfi.value / (n_qubits * n_qubits) as f64,
        cramer_rao_single_round: metrology::cramer_rao_bound(qfi.value, 1).ok(),
        cramer_rao_at_rounds: scenario
            .sensing
            .as_ref()
            .and_then(|s| metrology::cramer_rao_bound(qfi.value, s.rounds).ok()),
        bures_step: qfi_cfg.bures_step,
        bures_oracle: bures,
        qfi,
    };

    let reports = vec![RepetitionReport {
        repetition: 0,
        seed: scenario.seeds.master,
        verification: None,
        sensing: None,
        privacy: None,
        qfi: Some(body),
    }];
    let aggregate = AggregateStats {
        repetitions: 1,
        ..AggregateStats::default()
    };
    Ok(ScenarioRun {
        report: assemble(scenario, Command::Qfi, reports, aggregate),
        per_test_logs: Vec::new(),
    })
}

fn assemble(
    scenario: &ResolvedScenario,
    command: Command,
    repetitions: Vec<RepetitionReport>,
    aggregate: AggregateStats,
) -> RunReport {
    RunReport {
        artifact_version: ARTIFACT_VERSION,
        command: command.name().to_string(),
        scenario: scenario.clone(),
        repetitions,
        aggregate,
    }
}

fn aggregate_verify(reports: &[RepetitionReport]) -> AggregateStats {
    let summaries: Vec<&VerificationSummary> =
        reports.iter().filter_map(|r| r.verification.as_ref()).collect();
    let accepted = summaries.iter().filter(|s| s.accepted).count();
    let failure_rates: Vec<f64> = summaries.iter().map(|s| s.average_failure_rate).collect();
    let fidelities: Vec<f64> = summaries
        .iter()
        .map(|s| s.honest_reduced_fidelity)
        .collect();
    let (mean_f, std_f) = mean_std(&failure_rates);
    let (mean_fid, _) = mean_std(&fidelities);
    AggregateStats {
        repetitions: reports.len(),
        acceptance_rate: (!summaries.is_empty())
            .then(|| accepted as f64 / summaries.len() as f64),
        mean_failure_rate: mean_f,
        std_failure_rate: std_f,
        mean_fidelity: mean_fid,
        ..AggregateStats::default()
    }
}

fn aggregate_sense(reports: &[RepetitionReport]) -> AggregateStats {
    let estimates: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.sensing.as_ref())
        .map(|s| s.estimate)
        .collect();
    let squared_errors: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.sensing.as_ref())
        .map(|s| s.squared_error)
        .collect();
    let failure_rates: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.sensing.as_ref())
        .map(|s| s.mean_accepted_failure_rate)
        .collect();
    let (mean_estimate, std_estimate) = mean_std(&estimates);
    let (mean_squared_error, _) = mean_std(&squared_errors);
    let (mean_failure_rate, std_failure_rate) = mean_std(&failure_rates);
    AggregateStats {
        repetitions: reports.len(),
        mean_estimate,
        std_estimate,
        mean_squared_error,
        mean_failure_rate,
        std_failure_rate,
        ..AggregateStats::default()
    }
}

fn aggregate_privacy(reports: &[RepetitionReport]) -> AggregateStats {
    let audits: Vec<&sensing::PrivacyAuditReport> =
        reports.iter().filter_map(|r| r.privacy.as_ref()).collect();
    let accepted = audits.iter().filter(|a| a.accepted).count();
    let epsilons: Vec<f64> = audits.iter().map(|a| a.measured.epsilon).collect();
    let within = audits.iter().filter(|a| a.within_ceiling).count();
    let (mean_eps, _) = mean_std(&epsilons);
    let fidelities: Vec<f64> = audits.iter().map(|a| a.honest_reduced_fidelity).collect();
    let (mean_fid, _) = mean_std(&fidelities);
    AggregateStats {
        repetitions: reports.len(),
        acceptance_rate: (!audits.is_empty()).then(|| accepted as f64 / audits.len() as f64),
        mean_fidelity: mean_fid,
        mean_privacy_epsilon: mean_eps,
        within_ceiling_rate: (!audits.is_empty())
            .then(|| within as f64 / audits.len() as f64),
        ..AggregateStats::default()
    }
}
