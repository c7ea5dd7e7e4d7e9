//! Threat models: who is honest, what happens to each distributed copy,
//! and how dishonest nodes lie about their measurement results.
//!
//! Models are declarative and immutable. All randomness is injected, so a
//! coalition replays bit-for-bit from its coordination seed.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::encoding::QubitAssignment;
use crate::error::{Error, Result};
use crate::qcore::{self, C64, QuantumState};
use crate::rng::SimRng;
use crate::tol;
use rand::Rng;

/// Who checks the reports. A single verifying node is the plain protocol;
/// the common-random-source marker drives the symmetrised variant where
/// the verifier role rotates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VerifierRole {
    Node { index: usize },
    CommonRandomSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    n_nodes: usize,
    honest: Vec<usize>,
    verifier: VerifierRole,
}

impl NetworkTopology {
    pub fn new(n_nodes: usize, honest: &[usize], verifier: VerifierRole) -> Result<Self> {
        let mut honest: Vec<usize> = honest.to_vec();
        honest.sort_unstable();
        honest.dedup();
        if honest.is_empty() {
            return Err(Error::HonestSetTooSmall { min: 1, got: 0 });
        }
        for &node in &honest {
            if node >= n_nodes {
                return Err(Error::NodeIndexOutOfRange {
                    index: node,
                    n_nodes,
                });
            }
        }
        if let VerifierRole::Node { index } = verifier {
            if index >= n_nodes {
                return Err(Error::NodeIndexOutOfRange {
                    index,
                    n_nodes,
                });
            }
        }
        Ok(Self {
            n_nodes,
            honest,
            verifier,
        })
    }

    pub fn all_honest(n_nodes: usize, verifier: VerifierRole) -> Result<Self> {
        let honest: Vec<usize> = (0..n_nodes).collect();
        Self::new(n_nodes, &honest, verifier)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Sorted, deduplicated.
    pub fn honest(&self) -> &[usize] {
        &self.honest
    }

    pub fn is_honest(&self, node: usize) -> bool {
        self.honest.binary_search(&node).is_ok()
    }

    pub fn dishonest(&self) -> Vec<usize> {
        (0..self.n_nodes).filter(|&v| !self.is_honest(v)).collect()
    }

    pub fn verifier(&self) -> VerifierRole {
        self.verifier
    }
}

/// Single-qubit noise acting on one source-to-node edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelSpec {
    /// Phase flip with probability p: {sqrt(1-p) I, sqrt(p) Z}.
    Dephasing { p: f64 },
    /// Uniform Pauli noise: I with 1-3p/4, each of X, Y, Z with p/4.
    Depolarizing { p: f64 },
    /// Arbitrary Kraus list; each matrix row-major, entries [re, im].
    Custom { kraus: Vec<Vec<Vec<[f64; 2]>>> },
}

fn matrix_from_rows(rows: &[Vec<[f64; 2]>]) -> Result<DMatrix<C64>> {
    let n = rows.len();
    let mut m = DMatrix::<C64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        for (j, &[re, im]) in row.iter().enumerate() {
            m[(i, j)] = C64::new(re, im);
        }
    }
    Ok(m)
}

fn check_probability(what: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange { what, value: p });
    }
    Ok(())
}

impl ChannelSpec {
    pub fn kraus_operators(&self) -> Result<Vec<DMatrix<C64>>> {
        let pauli = |xs: [[f64; 2]; 4]| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(xs[0][0], xs[0][1]),
                    C64::new(xs[1][0], xs[1][1]),
                    C64::new(xs[2][0], xs[2][1]),
                    C64::new(xs[3][0], xs[3][1]),
                ],
            )
        };
        let id = pauli([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]);
        let sx = pauli([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]);
        let sy = pauli([[0.0, 0.0], [0.0, -1.0], [0.0, 1.0], [0.0, 0.0]]);
        let sz = pauli([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]]);

        let ops = match self {
            Self::Dephasing { p } => {
                check_probability("dephasing p", *p)?;
                vec![
                    id * C64::new((1.0 - p).sqrt(), 0.0),
                    sz * C64::new(p.sqrt(), 0.0),
                ]
            }
            Self::Depolarizing { p } => {
                check_probability("depolarizing p", *p)?;
                vec![
                    id * C64::new((1.0 - 0.75 * p).sqrt(), 0.0),
                    sx * C64::new((p / 4.0).sqrt(), 0.0),
                    sy * C64::new((p / 4.0).sqrt(), 0.0),
                    sz * C64::new((p / 4.0).sqrt(), 0.0),
                ]
            }
            Self::Custom { kraus } => {
                if kraus.is_empty() {
                    return Err(Error::EmptyInput("Kraus list"));
                }
                kraus
                    .iter()
                    .map(|rows| matrix_from_rows(rows))
                    .collect::<Result<Vec<_>>>()?
            }
        };

        let dim = ops[0].nrows();
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        for k in &ops {
            sum += k.adjoint() * k;
        }
        let deviation = qcore::max_abs(&(sum - DMatrix::<C64>::identity(dim, dim)));
        if deviation > tol::KRAUS_TOL {
            return Err(Error::MalformedKraus { deviation });
        }
        Ok(ops)
    }
}

/// What a dishonest node does. Defaults are all-honest behavior, so a
/// node can be marked dishonest in the topology while acting normally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DishonestBehavior {
    /// Probability of reporting the negated measurement outcome.
    pub report_flip_prob: f64,
    /// Applied to each qubit this node holds, right before measurement.
    /// Row-major 2x2, entries [re, im].
    pub pre_measurement_unitary: Option<Vec<Vec<[f64; 2]>>>,
    /// In the sensing phase, silently skip the local phase encoding.
    pub encode_skip: bool,
    /// When this node is drawn as verifier in the symmetrised protocol,
    /// probability of declaring the round failed regardless of the data.
    pub verifier_fail_prob: f64,
}

impl Default for DishonestBehavior {
    fn default() -> Self {
        Self {
            report_flip_prob: 0.0,
            pre_measurement_unitary: None,
            encode_skip: false,
            verifier_fail_prob: 0.0,
        }
    }
}

impl DishonestBehavior {
    pub fn validate(&self) -> Result<()> {
        check_probability("report flip probability", self.report_flip_prob)?;
        check_probability("verifier fail probability", self.verifier_fail_prob)?;
        if let Some(rows) = &self.pre_measurement_unitary {
            let u = matrix_from_rows(rows)?;
            if u.nrows() != 2 {
                return Err(Error::DimensionMismatch {
                    expected: 2,
                    got: u.nrows(),
                });
            }
            let dev = qcore::max_abs(&(u.adjoint() * &u - DMatrix::<C64>::identity(2, 2)));
            if dev > tol::UNITARITY_TOL {
                return Err(Error::NotUnitary { deviation: dev });
            }
        }
        Ok(())
    }

    fn unitary_matrix(&self) -> Result<Option<DMatrix<C64>>> {
        match &self.pre_measurement_unitary {
            None => Ok(None),
            Some(rows) => {
                self.validate()?;
                Ok(Some(matrix_from_rows(rows)?))
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub enum SourceAttack {
    #[default]
    None,
    /// The source hands out this state instead, every copy.
    FixedState(QuantumState),
    /// The source pushes every qubit through this channel before sending.
    Channel(ChannelSpec),
}

/// Hook for adaptive or exotic per-copy corruption. Receives the copy
/// index, the copy after the declarative attacks, and the stream that
/// copy's preparation draws from.
pub type CopyHook = dyn Fn(usize, QuantumState, &mut SimRng) -> QuantumState + Send + Sync;

#[derive(Clone, Default)]
pub struct AdversaryModel {
    pub source_attack: SourceAttack,
    /// Indexed by qubit. Empty means no channel noise anywhere; otherwise
    /// the length must match the resource state.
    pub channel_noise: Vec<Option<ChannelSpec>>,
    /// Keyed by node index. Entries for nodes the topology marks honest
    /// are ignored; honesty is the topology's call.
    pub dishonest_behavior: BTreeMap<usize, DishonestBehavior>,
    pub coordination_seed: u64,
    pub copy_hook: Option<Arc<CopyHook>>,
}

impl std::fmt::Debug for AdversaryModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AdversaryModel")
            .field("source_attack", &self.source_attack)
            .field("channel_noise", &self.channel_noise)
            .field("dishonest_behavior", &self.dishonest_behavior)
            .field("coordination_seed", &self.coordination_seed)
            .field("copy_hook", &self.copy_hook.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl AdversaryModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn uniform_channel(n_qubits: usize, spec: ChannelSpec) -> Self {
        Self {
            channel_noise: vec![Some(spec); n_qubits],
            ..Self::default()
        }
    }

    pub fn validate(&self, n_qubits: usize, topo: &NetworkTopology) -> Result<()> {
        match &self.source_attack {
            SourceAttack::None => {}
            SourceAttack::FixedState(s) => {
                if s.n_qubits() != n_qubits {
                    return Err(Error::LengthMismatch {
                        what: "fixed source state",
                        expected: n_qubits,
                        got: s.n_qubits(),
                    });
                }
            }
            SourceAttack::Channel(spec) => {
                spec.kraus_operators()?;
            }
        }
        if !self.channel_noise.is_empty() && self.channel_noise.len() != n_qubits {
            return Err(Error::LengthMismatch {
                what: "per-qubit channel list",
                expected: n_qubits,
                got: self.channel_noise.len(),
            });
        }
        for spec in self.channel_noise.iter().flatten() {
            spec.kraus_operators()?;
        }
        for (&node, behavior) in &self.dishonest_behavior {
            if node >= topo.n_nodes() {
                return Err(Error::NodeIndexOutOfRange {
                    index: node,
                    n_nodes: topo.n_nodes(),
                });
            }
            behavior.validate()?;
        }
        Ok(())
    }

    /// Effective behavior of a node: dishonest nodes read their entry
    /// (default if missing), honest nodes always behave.
    pub fn behavior_of(&self, topo: &NetworkTopology, node: usize) -> DishonestBehavior {
        if topo.is_honest(node) {
            return DishonestBehavior::default();
        }
        self.dishonest_behavior
            .get(&node)
            .cloned()
            .unwrap_or_default()
    }

    pub fn is_trivial(&self, topo: &NetworkTopology) -> bool {
        matches!(self.source_attack, SourceAttack::None)
            && self.channel_noise.iter().all(Option::is_none)
            && self.copy_hook.is_none()
            && topo.dishonest().is_empty()
    }
}

/// Source attack, then per-qubit channel noise, then the hook if any.
/// Dishonest pre-measurement unitaries are NOT applied here; they attach
/// to the measurement step, which knows the qubit assignment.
pub fn prepare_copy(
    model: &AdversaryModel,
    topo: &NetworkTopology,
    ideal: &QuantumState,
    copy_index: usize,
    rng: &mut SimRng,
) -> Result<QuantumState> {
    model.validate(ideal.n_qubits(), topo)?;
    let mut state = match &model.source_attack {
        SourceAttack::None => ideal.clone(),
        SourceAttack::FixedState(s) => s.clone(),
        SourceAttack::Channel(spec) => {
            let kraus = spec.kraus_operators()?;
            let mut s = ideal.clone();
            for q in 0..ideal.n_qubits() {
                s = qcore::apply_channel(&s, &kraus, &[q])?;
            }
            s
        }
    };
    for (q, spec) in model.channel_noise.iter().enumerate() {
        if let Some(spec) = spec {
            state = qcore::apply_channel(&state, &spec.kraus_operators()?, &[q])?;
        }
    }
    if let Some(hook) = &model.copy_hook {
        state = hook(copy_index, state, rng);
    }
    Ok(state)
}

/// Local sabotage right before measurement: each dishonest node's unitary
/// hits every qubit that node holds.
pub fn apply_dishonest_unitaries(
    state: &QuantumState,
    model: &AdversaryModel,
    topo: &NetworkTopology,
    assignment: &QubitAssignment,
) -> Result<QuantumState> {
    let mut out = state.clone();
    for node in topo.dishonest() {
        let behavior = model.behavior_of(topo, node);
        if let Some(u) = behavior.unitary_matrix()? {
            let op = crate::qcore::LinearOperator::new(u)?;
            for q in assignment.qubits_of(node) {
                out = qcore::apply_unitary(&out, &op, &[q])?;
            }
        }
    }
    Ok(out)
}

/// What the verifier hears from `node`, given what the node measured.
pub fn report_outcome(
    model: &AdversaryModel,
    topo: &NetworkTopology,
    node: usize,
    true_outcome: i8,
    rng: &mut SimRng,
) -> Result<i8> {
    if node >= topo.n_nodes() {
        return Err(Error::NodeIndexOutOfRange {
            index: node,
            n_nodes: topo.n_nodes(),
        });
    }
    debug_assert!(true_outcome == 1 || true_outcome == -1);
    if topo.is_honest(node) {
        return Ok(true_outcome);
    }
    let q = model.behavior_of(topo, node).report_flip_prob;
    check_probability("report flip probability", q)?;
    if rng.random_bool(q) {
        Ok(-true_outcome)
    } else {
        Ok(true_outcome)
    }
}

/// Reduced state over the qubits held by honest nodes.
pub fn honest_reduced(
    state: &QuantumState,
    topo: &NetworkTopology,
    assignment: &QubitAssignment,
) -> Result<QuantumState> {
    if assignment.n_nodes() > topo.n_nodes() {
        return Err(Error::NodeIndexOutOfRange {
            index: assignment.n_nodes() - 1,
            n_nodes: topo.n_nodes(),
        });
    }
    let keep: Vec<usize> = (0..assignment.n_qubits())
        .filter(|&q| topo.is_honest(assignment.owner(q)))
        .collect();
    if keep.is_empty() {
        return Err(Error::NoHonestQubits);
    }
    qcore::partial_trace(state, &keep)
}
