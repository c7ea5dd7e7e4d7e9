//! The sensing protocol end to end: verify a copy, encode local phases,
//! measure everything in X, estimate a linear function of the phases from
//! accepted-round parities. Also the integrity bounds on bias and
//! variance, the privacy guarantee evaluated on observed failure rates,
//! and an audit that measures leaked Fisher information on the actual
//! simulated target.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{self, AdversaryModel, NetworkTopology};
use crate::encoding::{self, LinearFunctionSpec, PhaseVector};
use crate::error::{Error, Result};
use crate::ghz;
use crate::metrology::{self, PrivacyAssessment};
use crate::qcore::{self, C64, LinearOperator, QuantumState};
use crate::rng::{self, label, SimRng};
use crate::tol;
use crate::verification::{self, RunOptions, VerificationParams};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensingParams {
    /// Rounds; every round runs a full verification.
    pub nu: usize,
    pub verification: VerificationParams,
    pub function: LinearFunctionSpec,
    /// Ground truth, visible to the experimenter only.
    pub true_phases: PhaseVector,
    /// Open interval the arccos estimator represents faithfully for the
    /// weighted phase sum. Estimates outside are flagged, not rejected.
    pub branch_window: (f64, f64),
}

impl SensingParams {
    pub fn new(
        nu: usize,
        verification: VerificationParams,
        function: LinearFunctionSpec,
        true_phases: PhaseVector,
    ) -> Result<Self> {
        let params = Self {
            nu,
            verification,
            function,
            true_phases,
            branch_window: (0.0, std::f64::consts::PI),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 {
            return Err(Error::ZeroRounds);
        }
        self.verification.validate_basic()?;
        if self.true_phases.len() != self.function.n_nodes() {
            return Err(Error::LengthMismatch {
                what: "phase vector",
                expected: self.function.n_nodes(),
                got: self.true_phases.len(),
            });
        }
        if self.function.total_qubits() < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: self.function.total_qubits(),
            });
        }
        self.true_phases.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub accepted: bool,
    pub verification_failure_rate: f64,
    /// Ground-truth fidelity of this round's target, honest reduction
    /// against the ideal resource's.
    pub honest_reduced_fidelity: f64,
    /// Announced per-node parities, lies included; empty when the round's
    /// verification rejected.
    pub node_parities: Vec<i8>,
    /// Product of the announced parities; None when rejected.
    pub round_parity: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityEstimate {
    /// Mean announced parity, clamped into [-1, 1].
    pub mean_parity: f64,
    /// arccos of the mean parity: the weighted phase sum on the principal
    /// branch.
    pub phase_sum: f64,
    /// scale * phase_sum, the function estimate.
    pub value: f64,
    /// Whether the recovered phase sum lies strictly inside the window
    /// the arccos inversion is faithful on.
    pub in_branch_window: bool,
}

/// Invert the mean round parity through <X...X> = cos(weighted phase sum).
pub fn parity_estimator(
    parities: &[i8],
    spec: &LinearFunctionSpec,
    branch_window: (f64, f64),
) -> Result<ParityEstimate> {
    if parities.is_empty() {
        return Err(Error::EmptyInput("round parities"));
    }
    let mean = parities.iter().map(|&p| p as f64).sum::<f64>() / parities.len() as f64;
    let mean_parity = mean.clamp(-1.0, 1.0);
    let phase_sum = mean_parity.acos();
    Ok(ParityEstimate {
        mean_parity,
        phase_sum,
        value: spec.scale * phase_sum,
        in_branch_window: phase_sum > branch_window.0 && phase_sum < branch_window.1,
    })
}

/// Bias ceiling 2 o epsilon / |d_obs| that acceptance buys for
/// estimates built from verified resources.
pub fn integrity_bias_bound(o: f64, epsilon: f64, d_obs: f64) -> Result<f64> {
    debug_assert!(o >= 0.0 && epsilon >= 0.0);
    if d_obs == 0.0 {
        return Err(Error::VanishingSignal);
    }
    Ok(2.0 * o * epsilon / d_obs.abs())
}

/// Variance-excess ceiling 4 o^2 (2 epsilon/nu + epsilon^2) / d_obs^2.
pub fn integrity_variance_bound(o: f64, epsilon: f64, nu: usize, d_obs: f64) -> Result<f64> {
    debug_assert!(o >= 0.0 && epsilon >= 0.0);
    if nu == 0 {
        return Err(Error::ZeroRounds);
    }
    if d_obs == 0.0 {
        return Err(Error::VanishingSignal);
    }
    Ok(4.0 * o * o * (2.0 * epsilon / nu as f64 + epsilon * epsilon) / (d_obs * d_obs))
}

/// The a-priori deviation ceiling (2 sqrt(c) + 1)/n that acceptance
/// grants from the protocol's own viewpoint.
pub fn protocol_epsilon(c: f64, n: usize) -> f64 {
    debug_assert!(c > 0.0 && n >= 2);
    (2.0 * c.sqrt() + 1.0) / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyGuarantee {
    /// 24 sqrt(max(0, 2 sqrt(c)/n - 2 n f)): ceiling on the Fisher
    /// information an eavesdropper gains about any one honest phase.
    pub qfi_ceiling: f64,
    /// Ceiling divided by the honest count: per-node leakage rate.
    pub eps_over_n: f64,
    /// Ceiling over the squared honest count, matching the normalization
    /// in the epsilon-privacy definition.
    pub eps_definition: f64,
    /// max(0, 1 - n^{1 - 2mc/3}): chance the ceiling applies at all.
    pub probability_floor: f64,
    /// The radicand went negative and was clamped; the guarantee is then
    /// vacuous but never wrong.
    pub radicand_clamped: bool,
}

pub fn privacy_guarantee(
    m: f64,
    c: f64,
    n: usize,
    f: f64,
    honest_count: usize,
) -> Result<PrivacyGuarantee> {
    if honest_count == 0 {
        return Err(Error::HonestSetTooSmall { min: 1, got: 0 });
    }
    let nf = n as f64;
    let radicand = 2.0 * c.sqrt() / nf - 2.0 * nf * f;
    let qfi_ceiling = 24.0 * radicand.max(0.0).sqrt();
    let h = honest_count as f64;
    Ok(PrivacyGuarantee {
        qfi_ceiling,
        eps_over_n: qfi_ceiling / h,
        eps_definition: qfi_ceiling / (h * h),
        probability_floor: verification::soundness_probability(m, c, n),
        radicand_clamped: radicand < 0.0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    /// scale * arccos(mean parity): the function estimate.
    pub estimate: f64,
    pub mean_parity: f64,
    pub phase_sum_estimate: f64,
    pub in_branch_window: bool,
    pub rounds_used: usize,
    pub rounds_discarded: usize,
    /// Ground truth f(Theta) and the weighted phase sum behind it.
    pub true_value: f64,
    pub true_phase_sum: f64,
    pub bias_vs_truth: f64,
    pub squared_error: f64,
    /// Estimator variance by error propagation through arccos; the
    /// sin factors cancel, leaving exactly scale^2 / rounds_used.
    pub estimator_variance: f64,
    /// Slope magnitude |d<parity>/df| = |sin(phase sum)| / |scale|,
    /// evaluated at the estimate and at the ground truth.
    pub d_obs_at_estimate: f64,
    pub d_obs_at_truth: f64,
    /// Operator-norm bound o for the parity observable.
    pub observable_bound: f64,
    /// Deviation ceilings: the a-priori (2 sqrt(c)+1)/n the protocol can
    /// claim, and the omniscient mean 1 - F over accepted targets.
    pub epsilon_protocol: f64,
    pub epsilon_measured: f64,
    /// Integrity ceilings under both epsilon views; None when the slope
    /// vanishes at the evaluation point.
    pub bias_bound_protocol: Option<f64>,
    pub bias_bound_measured: Option<f64>,
    pub variance_bound_protocol: Option<f64>,
    pub variance_bound_measured: Option<f64>,
    pub mean_accepted_failure_rate: f64,
    pub privacy: PrivacyGuarantee,
    pub soundness_probability: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SensingOptions {
    pub record_rounds: bool,
}

#[derive(Debug, Clone)]
pub struct SensingRun {
    pub report: EstimateReport,
    /// One record per round when requested, else empty.
    pub rounds: Vec<RoundRecord>,
}

pub fn run_sensing_protocol(
    params: &SensingParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
) -> Result<EstimateReport> {
    Ok(run_sensing_protocol_with(params, topo, model, seed, &SensingOptions::default())?.report)
}

pub fn run_sensing_protocol_with(
    params: &SensingParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
    options: &SensingOptions,
) -> Result<SensingRun> {
    params.validate()?;
    check_network_shape(params, topo)?;

    let (resource, assignment) = encoding::resource_state_for_function(&params.function)?;
    let stabilizers =
        ghz::stabilizer_generators(resource.n_qubits())?.conjugate_by_x(&assignment.x_flags())?;
    let n_eff = resource.n_qubits();

    // Dishonest nodes may withhold their encoding; everyone else applies
    // the ground-truth phase. The effective vector is fixed across rounds.
    let effective_phases = PhaseVector(
        (0..topo.n_nodes())
            .map(|j| {
                if model.behavior_of(topo, j).encode_skip {
                    0.0
                } else {
                    params.true_phases.0[j]
                }
            })
            .collect(),
    );

    let dishonest = topo.dishonest();
    let mut accepted_parities: Vec<i8> = Vec::new();
    let mut fidelity_sum = 0.0;
    let mut failure_rate_sum = 0.0;
    let mut rounds = Vec::with_capacity(if options.record_rounds { params.nu } else { 0 });

    for round in 0..params.nu {
        let ctx = [label::ROUND, round as u64];
        let outcome = verification::run_resource_verification(
            &params.verification,
            topo,
            model,
            &resource,
            &assignment,
            &stabilizers,
            seed,
            &ctx,
            &RunOptions::default(),
        )?;

        if !outcome.accepted {
            if options.record_rounds {
                rounds.push(RoundRecord {
                    round_index: round,
                    accepted: false,
                    verification_failure_rate: outcome.transcript.average_failure_rate,
                    honest_reduced_fidelity: outcome.honest_reduced_fidelity,
                    node_parities: Vec::new(),
                    round_parity: None,
                });
            }
            continue;
        }

        let encoded =
            encoding::encode_network(&outcome.target_state, &effective_phases, &assignment)?;
        let sabotaged = adversary::apply_dishonest_unitaries(&encoded, model, topo, &assignment)?;

        let mut sense_rng = rng::stream(seed, &[label::ROUND, round as u64, label::SENSE]);
        let x_outcomes = sample_x_outcomes(&sabotaged, &mut sense_rng)?;

        // True per-node parities, then the announcement layer. Dishonest
        // nodes burn one coordination draw each, lie or not, so the
        // coalition's stream stays aligned when flip probabilities change.
        let mut announce_rng = rng::stream(
            model.coordination_seed,
            &[label::ROUND, round as u64, label::SENSE, label::ADVERSARY],
        );
        let mut node_parities = vec![1i8; topo.n_nodes()];
        for node in 0..topo.n_nodes() {
            let mut parity = 1i8;
            for q in assignment.qubits_of(node) {
                parity *= x_outcomes[q];
            }
            node_parities[node] = parity;
        }
        for &d in &dishonest {
            let q = model.behavior_of(topo, d).report_flip_prob;
            if announce_rng.random_bool(q) {
                node_parities[d] = -node_parities[d];
            }
        }
        let round_parity: i8 = node_parities.iter().product();

        accepted_parities.push(round_parity);
        fidelity_sum += outcome.honest_reduced_fidelity;
        failure_rate_sum += outcome.transcript.average_failure_rate;
        if options.record_rounds {
            rounds.push(RoundRecord {
                round_index: round,
                accepted: true,
                verification_failure_rate: outcome.transcript.average_failure_rate,
                honest_reduced_fidelity: outcome.honest_reduced_fidelity,
                node_parities,
                round_parity: Some(round_parity),
            });
        }
    }

    let used = accepted_parities.len();
    if used == 0 {
        return Err(Error::ZeroAcceptedRounds);
    }
    let estimate = parity_estimator(&accepted_parities, &params.function, params.branch_window)?;

    let scale = params.function.scale;
    let true_value = encoding::function_value(&params.function, &params.true_phases)?;
    let true_phase_sum = true_value / scale;
    let epsilon_measured = 1.0 - fidelity_sum / used as f64;
    let epsilon_protocol = protocol_epsilon(params.verification.c, n_eff);
    let mean_accepted_failure_rate = failure_rate_sum / used as f64;

    let d_at = |phase_sum: f64| (phase_sum.sin() / scale).abs();
    let d_obs_at_estimate = d_at(estimate.phase_sum);
    let d_obs_at_truth = d_at(true_phase_sum);
    let o = 1.0;

    let bias_bound = |eps: f64, d: f64| integrity_bias_bound(o, eps, d).ok();
    let var_bound = |eps: f64, d: f64| integrity_variance_bound(o, eps, used, d).ok();

    let lambda = params.verification.lambda;
    let soundness = if lambda == 1 {
        verification::soundness_probability(params.verification.m, params.verification.c, n_eff)
    } else {
        verification::symmetrised_fidelity_bound(
            params.verification.m,
            params.verification.c,
            n_eff,
            mean_accepted_failure_rate,
            lambda,
            topo.honest().len(),
        )
        .probability_floor
    };

    let report = EstimateReport {
        estimate: estimate.value,
        mean_parity: estimate.mean_parity,
        phase_sum_estimate: estimate.phase_sum,
        in_branch_window: estimate.in_branch_window,
        rounds_used: used,
        rounds_discarded: params.nu - used,
        true_value,
        true_phase_sum,
        bias_vs_truth: estimate.value - true_value,
        squared_error: (estimate.value - true_value).powi(2),
        estimator_variance: scale * scale / used as f64,
        d_obs_at_estimate,
        d_obs_at_truth,
        observable_bound: o,
        epsilon_protocol,
        epsilon_measured,
        bias_bound_protocol: bias_bound(epsilon_protocol, d_obs_at_estimate),
        bias_bound_measured: bias_bound(epsilon_measured, d_obs_at_truth),
        variance_bound_protocol: var_bound(epsilon_protocol, d_obs_at_estimate),
        variance_bound_measured: var_bound(epsilon_measured, d_obs_at_truth),
        mean_accepted_failure_rate,
        privacy: privacy_guarantee(
            params.verification.m,
            params.verification.c,
            n_eff,
            mean_accepted_failure_rate,
            topo.honest().len(),
        )?,
        soundness_probability: soundness,
    };
    Ok(SensingRun { report, rounds })
}

fn check_network_shape(params: &SensingParams, topo: &NetworkTopology) -> Result<()> {
    if params.function.n_nodes() != topo.n_nodes() {
        return Err(Error::LengthMismatch {
            what: "function weights",
            expected: topo.n_nodes(),
            got: params.function.n_nodes(),
        });
    }
    verification::check_protocol_shape(params.verification.lambda, topo)
}

/// Measure every qubit in the X basis in one joint sample. Rotates by
/// Hadamards, then draws a computational-basis index from the diagonal.
fn sample_x_outcomes(state: &QuantumState, rng: &mut SimRng) -> Result<Vec<i8>> {
    let n = state.n_qubits();
    let h = FRAC_1_SQRT_2;
    let hadamard = LinearOperator::new(DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(-h, 0.0),
        ],
    ))?;
    let mut rotated = state.clone();
    for q in 0..n {
        rotated = qcore::apply_unitary(&rotated, &hadamard, &[q])?;
    }
    let probs: Vec<f64> = match rotated.amplitudes() {
        Some(amps) => amps.iter().map(|a| a.norm_sqr()).collect(),
        None => {
            let m = rotated.matrix().expect("mixed state exposes its matrix");
            (0..m.nrows()).map(|i| m[(i, i)].re.max(0.0)).collect()
        }
    };
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut index = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            index = i;
            break;
        }
    }
    // Bit 0 after the rotation is the +1 eigenvalue of X.
    Ok((0..n)
        .map(|q| if (index >> (n - 1 - q)) & 1 == 1 { -1 } else { 1 })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivacyAuditReport {
    pub accepted: bool,
    pub verification_failure_rate: f64,
    pub honest_reduced_fidelity: f64,
    /// Leaked Fisher information measured on the simulated target under
    /// the best hiding strategy, per honest node.
    pub measured: PrivacyAssessment,
    /// Guaranteed ceilings evaluated at the observed failure rate.
    pub guarantee: PrivacyGuarantee,
    /// measured epsilon <= eps_definition; meaningful on accepted runs.
    pub within_ceiling: bool,
}

/// Run one verification, then measure how much Fisher information about
/// each honest phase actually leaks from the surviving target state.
/// Rejected runs are audited too; the guarantee just does not claim
/// anything there, so `accepted` says which case occurred.
pub fn empirical_privacy_audit(
    params: &SensingParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
) -> Result<PrivacyAuditReport> {
    params.validate()?;
    check_network_shape(params, topo)?;

    let (resource, assignment) = encoding::resource_state_for_function(&params.function)?;
    let stabilizers =
        ghz::stabilizer_generators(resource.n_qubits())?.conjugate_by_x(&assignment.x_flags())?;
    let outcome = verification::run_resource_verification(
        &params.verification,
        topo,
        model,
        &resource,
        &assignment,
        &stabilizers,
        seed,
        &[],
        &RunOptions::default(),
    )?;

    let measured = metrology::privacy_epsilon(
        &outcome.target_state,
        &assignment,
        &params.true_phases,
        topo.honest(),
        tol::QFI_TRUNCATION_TOL,
    )?;
    let guarantee = privacy_guarantee(
        params.verification.m,
        params.verification.c,
        outcome.effective_n,
        outcome.transcript.average_failure_rate,
        topo.honest().len(),
    )?;
    Ok(PrivacyAuditReport {
        accepted: outcome.accepted,
        verification_failure_rate: outcome.transcript.average_failure_rate,
        honest_reduced_fidelity: outcome.honest_reduced_fidelity,
        within_ceiling: measured.epsilon <= guarantee.eps_definition,
        measured,
        guarantee,
    })
}
