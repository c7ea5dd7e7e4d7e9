//! Stabilizer verification of distributed resource copies, in two shapes:
//! a single honest verifier collecting reports, and the symmetrised
//! variant where a trusted source of shared randomness rotates the
//! verifier role across test sets.
//!
//! Tests never materialize post-measurement states. Each prepared copy is
//! scored by its exact failure probability for the generator it is
//! assigned to, and a Bernoulli draw decides the recorded outcome; the
//! copy is discarded either way, which is also what the protocol does.

use serde::{Deserialize, Serialize};

use crate::adversary::{self, AdversaryModel, NetworkTopology, VerifierRole};
use crate::encoding::QubitAssignment;
use crate::error::{Error, Result};
use crate::ghz::{self, StabilizerSet, TestVerdict};
use crate::qcore::{self, QuantumState};
use crate::rng::{self, label};
use rand::Rng;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationParams {
    /// Test-count constant in N_test = ceil(m n^4 ln n).
    pub m: f64,
    /// Trade-off constant in the fidelity and soundness bounds.
    pub c: f64,
    /// Network size the parameters were chosen for.
    pub n_nodes: usize,
    /// 1 for the verifier-led protocol; >= 2 symmetrises.
    pub lambda: usize,
    /// Replaces the N_test formula when set; used to scale runs down.
    pub n_test_override: Option<usize>,
    /// Run despite a violated constant constraint. Bounds get flagged
    /// non-applicable instead of silently reported.
    pub allow_constraint_violation: bool,
}

impl VerificationParams {
    pub fn new(m: f64, c: f64, n_nodes: usize, lambda: usize) -> Result<Self> {
        let params = Self {
            m,
            c,
            n_nodes,
            lambda,
            n_test_override: None,
            allow_constraint_violation: false,
        };
        params.validate_basic()?;
        Ok(params)
    }

    pub fn validate_basic(&self) -> Result<()> {
        if !(self.m > 0.0) {
            return Err(Error::NonPositiveConstant {
                name: "m",
                value: self.m,
            });
        }
        if !(self.c > 0.0) {
            return Err(Error::NonPositiveConstant {
                name: "c",
                value: self.c,
            });
        }
        if self.n_nodes < 2 {
            return Err(Error::TooFewNodes {
                min: 2,
                got: self.n_nodes,
            });
        }
        if self.lambda == 0 {
            return Err(Error::NonPositiveConstant {
                name: "lambda",
                value: 0.0,
            });
        }
        Ok(())
    }

    /// The verifier-led protocol requires 3/(2m) < c < (n-1)^2/4. The
    /// symmetrised variant states no closed-form window, so nothing is
    /// checked there beyond positivity.
    pub fn constraint_violations(&self, effective_n: usize) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda == 1 {
            let lower = 3.0 / (2.0 * self.m);
            let upper = (effective_n as f64 - 1.0).powi(2) / 4.0;
            if self.c <= lower {
                out.push(format!(
                    "c = {} must exceed 3/(2m) = {lower} for the soundness bound",
                    self.c
                ));
            }
            if self.c >= upper {
                out.push(format!(
                    "c = {} must stay below (n-1)^2/4 = {upper} for the fidelity bound",
                    self.c
                ));
            }
        }
        out
    }

    pub fn n_test(&self, effective_n: usize) -> Result<usize> {
        match self.n_test_override {
            Some(n) => {
                if n == 0 {
                    return Err(Error::NonPositiveConstant {
                        name: "n_test_override",
                        value: 0.0,
                    });
                }
                Ok(n)
            }
            None => required_tests(self.m, effective_n),
        }
    }
}

/// N_test = ceil(m n^4 ln n).
pub fn required_tests(m: f64, n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    if !(m > 0.0) {
        return Err(Error::NonPositiveConstant { name: "m", value: m });
    }
    let nf = n as f64;
    Ok((m * nf.powi(4) * nf.ln()).ceil() as usize)
}

/// (lambda+1) lambda n N_test copies requested from the source; at
/// lambda = 1 this is the familiar 2 n N_test.
pub fn total_copies(n: usize, n_test: usize, lambda: usize) -> usize {
    (lambda + 1) * lambda * n * n_test
}

/// Accept iff the average failure rate stays at or below 1/(2 lambda n^2).
pub fn acceptance_threshold(n: usize, lambda: usize) -> f64 {
    debug_assert!(n >= 2 && lambda >= 1);
    1.0 / (2.0 * lambda as f64 * (n * n) as f64)
}

/// Fidelity floor for the state kept by an accepting run:
/// max(0, 1 - 2 sqrt(c)/n - 2 n f).
pub fn fidelity_bound(c: f64, n: usize, f: f64) -> f64 {
    debug_assert!(c > 0.0 && (0.0..=1.0).contains(&f));
    let nf = n as f64;
    (1.0 - 2.0 * c.sqrt() / nf - 2.0 * nf * f).max(0.0)
}

/// Probability that the fidelity floor actually holds:
/// max(0, 1 - n^{1 - 2mc/3}).
pub fn soundness_probability(m: f64, c: f64, n: usize) -> f64 {
    debug_assert!(m > 0.0 && c > 0.0 && n >= 2);
    (1.0 - (n as f64).powf(1.0 - 2.0 * m * c / 3.0)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetrisedBounds {
    pub fidelity_floor: f64,
    pub probability_floor: f64,
    /// Set when the raw formula value fell outside [0, 1] and was clamped;
    /// a clamped bound is vacuous, not wrong.
    pub fidelity_floor_clamped: bool,
    pub probability_floor_clamped: bool,
}

/// Bounds for the symmetrised protocol. The fidelity floor is
/// 1 - (1/l - 1/l^2) - (1 + 1/l)(sqrt(c)/n + l n f); the probability floor
/// subtracts sum_{x=0}^{l} (1 - h/n)^x (h/n * n^{-2cm/3})^{l-x} from 1,
/// where h is the honest count. Both are clamped into [0, 1].
pub fn symmetrised_fidelity_bound(
    m: f64,
    c: f64,
    n: usize,
    f: f64,
    lambda: usize,
    honest_count: usize,
) -> SymmetrisedBounds {
    debug_assert!(lambda >= 1 && honest_count <= n);
    let nf = n as f64;
    let l = lambda as f64;
    let raw_fid = 1.0 - (1.0 / l - 1.0 / (l * l)) - (1.0 + 1.0 / l) * (c.sqrt() / nf + l * nf * f);
    let fidelity_floor = raw_fid.clamp(0.0, 1.0);

    let h_frac = honest_count as f64 / nf;
    let decay = nf.powf(-2.0 * c * m / 3.0);
    let mut miss = 0.0;
    for x in 0..=lambda {
        // 0^0 = 1 by convention so the degenerate ends of the sum keep
        // their single surviving term.
        let a = (1.0 - h_frac).powi(x as i32);
        let b = (h_frac * decay).powi((lambda - x) as i32);
        miss += a * b;
    }
    let raw_prob = 1.0 - miss;
    let probability_floor = raw_prob.clamp(0.0, 1.0);

    SymmetrisedBounds {
        fidelity_floor,
        probability_floor,
        fidelity_floor_clamped: (raw_fid - fidelity_floor).abs() > 0.0,
        probability_floor_clamped: (raw_prob - probability_floor).abs() > 0.0,
    }
}

/// One stabilizer test as the verifier saw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    /// Physical copy consumed by this test.
    pub copy_index: usize,
    pub generator_index: usize,
    /// Always 0 in the verifier-led protocol.
    pub set_index: usize,
    /// Reported single-node outcomes, lies included.
    pub node_outcomes: Vec<i8>,
    pub reported_parity: i8,
    pub verdict: TestVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationTranscript {
    pub n_test: usize,
    pub n_total: usize,
    /// Failure rate per test set, generator-major: entry g*lambda + s is
    /// generator g, set s. Length lambda * (generator count).
    pub per_generator_failures: Vec<f64>,
    /// f: plain mean of `per_generator_failures`.
    pub average_failure_rate: f64,
    pub copies_tested: usize,
    pub copies_discarded: usize,
    pub target_copy_index: usize,
    /// Verifier node drawn for each set (same indexing as
    /// `per_generator_failures`); absent in the verifier-led protocol.
    pub set_verifiers: Option<Vec<usize>>,
    pub accepted: bool,
    /// Per-test log; filled only when requested in the run options.
    pub records: Vec<TestRecord>,
}

/// Everything a run produces. The target state and the ground-truth
/// fidelity are the experimenter's omniscient view; in-protocol parties
/// only ever see the transcript.
#[derive(Debug, Clone)]
pub struct VerificationOutcome {
    pub accepted: bool,
    /// The surviving copy, corrupted exactly as the source and channels
    /// left it. Pre-measurement sabotage does not apply: the target is
    /// never measured during verification.
    pub target_state: QuantumState,
    /// Fidelity of the target's honest-node reduction against the ideal
    /// resource's honest-node reduction.
    pub honest_reduced_fidelity: f64,
    /// At lambda = 1 the trade-off bound at the observed f; otherwise the
    /// symmetrised fidelity floor.
    pub fidelity_bound: f64,
    /// At lambda = 1 the soundness probability; otherwise the symmetrised
    /// probability floor.
    pub soundness_probability: f64,
    /// False when the run was forced past a violated constant constraint.
    pub bounds_applicable: bool,
    pub constraint_violations: Vec<String>,
    pub symmetrised: Option<SymmetrisedBounds>,
    /// Qubit count the formulas were evaluated at (equals the node count
    /// for one qubit per node).
    pub effective_n: usize,
    pub threshold: f64,
    pub transcript: VerificationTranscript,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep one record per test. Costs memory, never changes statistics:
    /// per-node outcome splits draw from a separate presentation stream.
    pub record_tests: bool,
}

/// Verifier-led protocol on the standard resource: GHZ over one qubit per
/// node, tested against its stabilizer generators.
pub fn run_verification(
    params: &VerificationParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
) -> Result<VerificationOutcome> {
    run_verification_with(params, topo, model, seed, &[], &RunOptions::default())
}

pub fn run_verification_with(
    params: &VerificationParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
    ctx: &[u64],
    options: &RunOptions,
) -> Result<VerificationOutcome> {
    if params.lambda != 1 {
        return Err(Error::ConstraintViolated(vec![format!(
            "verifier-led protocol runs at lambda = 1, got {}",
            params.lambda
        )]));
    }
    check_protocol_shape(params.lambda, topo)?;
    standard_resource_run(params, topo, model, seed, ctx, options)
}

/// At lambda = 1 the protocol needs a designated honest verifier node; at
/// lambda >= 2 the verifier role must come from the common random source.
pub fn check_protocol_shape(lambda: usize, topo: &NetworkTopology) -> Result<()> {
    if lambda == 1 {
        match topo.verifier() {
            VerifierRole::Node { index } if topo.is_honest(index) => Ok(()),
            VerifierRole::Node { .. } | VerifierRole::CommonRandomSource => {
                Err(Error::VerifierNotHonest)
            }
        }
    } else if topo.verifier() != VerifierRole::CommonRandomSource {
        Err(Error::ConstraintViolated(vec![
            "symmetrised protocol draws verifiers from a common random source; set the \
             topology's verifier accordingly"
                .into(),
        ]))
    } else {
        Ok(())
    }
}

/// Symmetrised protocol: lambda >= 2 test sets per generator, each set's
/// verifier drawn by the common random source.
pub fn run_symmetrised_verification(
    params: &VerificationParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
) -> Result<VerificationOutcome> {
    run_symmetrised_verification_with(params, topo, model, seed, &[], &RunOptions::default())
}

pub fn run_symmetrised_verification_with(
    params: &VerificationParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
    ctx: &[u64],
    options: &RunOptions,
) -> Result<VerificationOutcome> {
    if params.lambda < 2 {
        return Err(Error::ConstraintViolated(vec![format!(
            "symmetrised protocol needs lambda >= 2, got {}",
            params.lambda
        )]));
    }
    check_protocol_shape(params.lambda, topo)?;
    standard_resource_run(params, topo, model, seed, ctx, options)
}

fn standard_resource_run(
    params: &VerificationParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    seed: u64,
    ctx: &[u64],
    options: &RunOptions,
) -> Result<VerificationOutcome> {
    if params.n_nodes != topo.n_nodes() {
        return Err(Error::LengthMismatch {
            what: "node count",
            expected: topo.n_nodes(),
            got: params.n_nodes,
        });
    }
    let n = topo.n_nodes();
    let resource = ghz::ghz_state(n)?;
    let assignment = QubitAssignment::one_per_node(n);
    let stabilizers = ghz::stabilizer_generators(n)?;
    run_resource_verification(
        params,
        topo,
        model,
        &resource,
        &assignment,
        &stabilizers,
        seed,
        ctx,
        options,
    )
}

fn labels(ctx: &[u64], tail: u64) -> Vec<u64> {
    let mut v = ctx.to_vec();
    v.push(tail);
    v
}

/// The engine behind both protocol shapes, generic over the resource.
/// Verifier legality must be checked by the caller; generalized resources
/// (several qubits per node) plug in here with their conjugated
/// stabilizers.
#[allow(clippy::too_many_arguments)]
pub fn run_resource_verification(
    params: &VerificationParams,
    topo: &NetworkTopology,
    model: &AdversaryModel,
    resource: &QuantumState,
    assignment: &QubitAssignment,
    stabilizers: &StabilizerSet,
    seed: u64,
    ctx: &[u64],
    options: &RunOptions,
) -> Result<VerificationOutcome> {
    params.validate_basic()?;
    model.validate(resource.n_qubits(), topo)?;
    if stabilizers.n_qubits() != resource.n_qubits() {
        return Err(Error::LengthMismatch {
            what: "stabilizer width",
            expected: resource.n_qubits(),
            got: stabilizers.n_qubits(),
        });
    }
    if assignment.n_qubits() != resource.n_qubits() {
        return Err(Error::LengthMismatch {
            what: "qubit assignment",
            expected: resource.n_qubits(),
            got: assignment.n_qubits(),
        });
    }
    if assignment.n_nodes() > topo.n_nodes() {
        return Err(Error::NodeIndexOutOfRange {
            index: assignment.n_nodes() - 1,
            n_nodes: topo.n_nodes(),
        });
    }

    // All formulas run on the qubit count; for the standard one qubit per
    // node resource that is exactly the node count.
    let n_eff = resource.n_qubits();
    let violations = params.constraint_violations(n_eff);
    if !violations.is_empty() && !params.allow_constraint_violation {
        return Err(Error::ConstraintViolated(violations));
    }

    let lambda = params.lambda;
    let n_test = params.n_test(n_eff)?;
    let n_gen = stabilizers.len();
    let n_sets = lambda * n_gen;
    let tested = n_sets * n_test;
    let n_total = total_copies(n_gen, n_test, lambda);
    let symmetrised = lambda >= 2;

    let mut protocol = rng::stream(seed, &labels(ctx, label::PROTOCOL));
    let mut presentation = rng::stream(seed, &labels(ctx, label::PRESENT));
    let mut adversary_stream =
        rng::stream(model.coordination_seed, &labels(ctx, label::ADVERSARY));

    // Which physical copy lands in which role. Copies are i.i.d. under
    // every declarative attack, so relabeling them is statistically inert
    // and the canonical layout (tested copies first, in slot order) is
    // used. A copy hook can make copies index-dependent, so its presence
    // forces an honest shuffle of physical indices.
    let hooked = model.copy_hook.is_some();
    let physical: Option<Vec<usize>> = if hooked {
        let mut idx: Vec<usize> = (0..n_total).collect();
        // Fisher-Yates off the protocol stream.
        for i in (1..n_total).rev() {
            let j = protocol.random_range(0..=i);
            idx.swap(i, j);
        }
        Some(idx)
    } else {
        None
    };
    let copy_for_slot = |slot: usize| -> usize {
        match &physical {
            Some(p) => p[slot],
            None => slot,
        }
    };

    let prepare_physical = |copy_index: usize| -> Result<QuantumState> {
        let mut copy_rng = rng::stream(
            model.coordination_seed,
            &{
                let mut l = labels(ctx, label::ADVERSARY);
                l.push(label::COPY);
                l.push(copy_index as u64);
                l
            },
        );
        adversary::prepare_copy(model, topo, resource, copy_index, &mut copy_rng)
    };

    // Fast path: without a hook every copy is the same CPTP image of the
    // ideal resource, so the per-generator failure probabilities are
    // computed once.
    let shared_failure_probs: Option<Vec<f64>> = if hooked {
        None
    } else {
        let copy = prepare_physical(0)?;
        let sabotaged = adversary::apply_dishonest_unitaries(&copy, model, topo, assignment)?;
        Some(
            stabilizers
                .generators()
                .iter()
                .map(|g| ghz::failure_probability(&sabotaged, g))
                .collect::<Result<Vec<_>>>()?,
        )
    };

    let dishonest = topo.dishonest();
    let n_nodes = assignment.n_nodes();
    let mut per_set_failures = vec![0usize; n_sets];
    let mut set_verifiers: Vec<usize> = Vec::new();
    let mut records = Vec::with_capacity(if options.record_tests { tested } else { 0 });

    for g in 0..n_gen {
        for s in 0..lambda {
            let set = g * lambda + s;
            let set_verifier = if symmetrised {
                let v = protocol.random_range(0..topo.n_nodes());
                set_verifiers.push(v);
                Some(v)
            } else {
                None
            };
            let verifier_fail_prob =
                set_verifier.map(|v| model.behavior_of(topo, v).verifier_fail_prob);

            for t in 0..n_test {
                let slot = set * n_test + t;
                let copy_index = copy_for_slot(slot);
                let p_fail = match &shared_failure_probs {
                    Some(probs) => probs[g],
                    None => {
                        let copy = prepare_physical(copy_index)?;
                        let sabotaged = adversary::apply_dishonest_unitaries(
                            &copy, model, topo, assignment,
                        )?;
                        ghz::failure_probability(&sabotaged, &stabilizers.generators()[g])?
                    }
                };
                let true_parity: i8 = if protocol.random_bool(p_fail) { -1 } else { 1 };

                // One adversary draw per dishonest node per test, lie or
                // no lie, so changing a flip probability never shifts any
                // other draw in the coalition's stream.
                let mut flips: Vec<(usize, bool)> = Vec::with_capacity(dishonest.len());
                for &d in &dishonest {
                    let q = model.behavior_of(topo, d).report_flip_prob;
                    flips.push((d, adversary_stream.random_bool(q)));
                }
                let mut reported_parity = true_parity;
                for &(_, flipped) in &flips {
                    if flipped {
                        reported_parity = -reported_parity;
                    }
                }

                // Same alignment trick for the drawn verifier's sabotage:
                // the draw happens every test in symmetrised mode, even
                // when the drawn verifier is honest (probability 0).
                let verifier_override = match verifier_fail_prob {
                    Some(q) => adversary_stream.random_bool(q),
                    None => false,
                };

                let verdict = if verifier_override || reported_parity == -1 {
                    TestVerdict::Fail
                } else {
                    TestVerdict::Pass
                };
                if verdict == TestVerdict::Fail {
                    per_set_failures[set] += 1;
                }

                if options.record_tests {
                    // Uniform split of the true parity into per-node signs:
                    // all nodes but the last draw freely, the last one
                    // balances the product. Lies then land on the liars'
                    // entries.
                    let mut outcomes = vec![1i8; n_nodes];
                    let mut prod: i8 = 1;
                    for o in outcomes.iter_mut().take(n_nodes - 1) {
                        *o = if presentation.random_bool(0.5) { 1 } else { -1 };
                        prod *= *o;
                    }
                    outcomes[n_nodes - 1] = true_parity * prod;
                    for &(d, flipped) in &flips {
                        if flipped {
                            outcomes[d] = -outcomes[d];
                        }
                    }
                    records.push(TestRecord {
                        copy_index,
                        generator_index: g,
                        set_index: s,
                        node_outcomes: outcomes,
                        reported_parity,
                        verdict,
                    });
                }
            }
        }
    }

    // Target: uniform among the copies verification never touched.
    let target_slot = tested + protocol.random_range(0..n_total - tested);
    let target_copy_index = copy_for_slot(target_slot);
    let target_state = prepare_physical(target_copy_index)?;

    let per_generator_failures: Vec<f64> = per_set_failures
        .iter()
        .map(|&k| k as f64 / n_test as f64)
        .collect();
    let average_failure_rate =
        per_generator_failures.iter().sum::<f64>() / per_generator_failures.len() as f64;
    let threshold = acceptance_threshold(n_eff, lambda);
    let accepted = average_failure_rate <= threshold;

    let ideal_reduced = adversary::honest_reduced(resource, topo, assignment)?;
    let target_reduced = adversary::honest_reduced(&target_state, topo, assignment)?;
    let honest_reduced_fidelity = qcore::fidelity(&target_reduced, &ideal_reduced)?;

    let f = average_failure_rate;
    let (fid_bound, soundness, sym_bounds) = if symmetrised {
        let b = symmetrised_fidelity_bound(
            params.m,
            params.c,
            n_eff,
            f,
            lambda,
            topo.honest().len(),
        );
        (b.fidelity_floor, b.probability_floor, Some(b))
    } else {
        (
            fidelity_bound(params.c, n_eff, f),
            soundness_probability(params.m, params.c, n_eff),
            None,
        )
    };

    Ok(VerificationOutcome {
        accepted,
        target_state,
        honest_reduced_fidelity,
        fidelity_bound: fid_bound,
        soundness_probability: soundness,
        bounds_applicable: violations.is_empty(),
        constraint_violations: violations,
        symmetrised: sym_bounds,
        effective_n: n_eff,
        threshold,
        transcript: VerificationTranscript {
            n_test,
            n_total,
            per_generator_failures,
            average_failure_rate,
            copies_tested: tested,
            copies_discarded: n_total - tested - 1,
            target_copy_index,
            set_verifiers: if symmetrised { Some(set_verifiers) } else { None },
            accepted,
            records,
        },
    })
}
