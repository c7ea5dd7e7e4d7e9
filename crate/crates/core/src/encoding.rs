//! Node-local phase encoding and resource states for integer-weighted
//! linear functions of the node phases.
//!
//! Each node owns one or more qubits. Encoding applies diag(1, e^{i
//! theta}) with the owner's phase to every owned qubit. For a function
//! M * sum_i k_i theta_i the resource is a GHZ state over sum |k_i|
//! qubits with X applied wherever k_i < 0; after encoding, the two GHZ
//! branches pick up exactly the phase difference sum_i k_i theta_i.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ghz;
use crate::qcore::{C64, QuantumState};
use crate::tol;

/// One phase per node, radians, unconstrained reals. Branch handling
/// (mod 2 pi windows) is the estimator's concern, not the encoder's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn uniform(n: usize, theta: f64) -> Self {
        Self(vec![theta; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.0.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidState(format!("non-finite phase {bad}")));
        }
        Ok(())
    }
}

/// f(Theta) = scale * sum_i weights[i] * theta_i with integer weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctionSpec {
    pub scale: f64,
    pub weights: Vec<i64>,
}

impl LinearFunctionSpec {
    pub fn new(scale: f64, weights: Vec<i64>) -> Result<Self> {
        if weights.iter().all(|&k| k == 0) {
            return Err(Error::AllWeightsZero);
        }
        Ok(Self { scale, weights })
    }

    /// The n-node average, f = mean(theta).
    pub fn average(n: usize) -> Self {
        Self {
            scale: 1.0 / n as f64,
            weights: vec![1; n],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    pub fn total_qubits(&self) -> usize {
        self.weights.iter().map(|k| k.unsigned_abs() as usize).sum()
    }
}

/// Owner and X-conjugation flag for one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitSlot {
    pub node: usize,
    pub x_conjugated: bool,
}

/// Qubit index -> owning node. Built either one-qubit-per-node or from a
/// function spec (|k_i| qubits for node i, flagged when k_i < 0).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitAssignment {
    slots: Vec<QubitSlot>,
}

impl QubitAssignment {
    pub fn one_per_node(n: usize) -> Self {
        Self {
            slots: (0..n)
                .map(|node| QubitSlot {
                    node,
                    x_conjugated: false,
                })
                .collect(),
        }
    }

    pub fn for_function(spec: &LinearFunctionSpec) -> Result<Self> {
        if spec.weights.iter().all(|&k| k == 0) {
            return Err(Error::AllWeightsZero);
        }
        let mut slots = Vec::with_capacity(spec.total_qubits());
        for (node, &k) in spec.weights.iter().enumerate() {
            for _ in 0..k.unsigned_abs() {
                slots.push(QubitSlot {
                    node,
                    x_conjugated: k < 0,
                });
            }
        }
        Ok(Self { slots })
    }

    pub fn n_qubits(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[QubitSlot] {
        &self.slots
    }

    pub fn owner(&self, qubit: usize) -> usize {
        self.slots[qubit].node
    }

    /// Number of distinct nodes that own at least one qubit; assignments
    /// index nodes densely from 0, so this is max node index + 1.
    pub fn n_nodes(&self) -> usize {
        self.slots.iter().map(|s| s.node + 1).max().unwrap_or(0)
    }

    pub fn qubits_of(&self, node: usize) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.node == node)
            .map(|(q, _)| q)
            .collect()
    }

    pub fn x_flags(&self) -> Vec<bool> {
        self.slots.iter().map(|s| s.x_conjugated).collect()
    }

    /// Restriction to a subset of qubits (same order), renumbering
    /// nothing: slots keep their original owning node.
    pub fn restrict(&self, qubits: &[usize]) -> Self {
        Self {
            slots: qubits.iter().map(|&q| self.slots[q]).collect(),
        }
    }
}

/// Diagonal of the encoding generator: entry per basis index, equal to
/// the sum of `per_node[owner]` over the qubits set to 1 in that index.
/// Encoding along direction d is exp(i t G) with G this diagonal.
pub fn phase_generator_diagonal(assignment: &QubitAssignment, per_node: &[f64]) -> Vec<f64> {
    let n = assignment.n_qubits();
    let dim = 1usize << n;
    let mut diag = vec![0.0; dim];
    for (q, slot) in assignment.slots().iter().enumerate() {
        let mask = 1usize << (n - 1 - q);
        let w = per_node[slot.node];
        for (index, d) in diag.iter_mut().enumerate() {
            if index & mask != 0 {
                *d += w;
            }
        }
    }
    diag
}

/// Apply each node's phase to every qubit it owns. Pure states stay
/// pure; the whole operation is one diagonal unitary.
pub fn encode_network(
    state: &QuantumState,
    phases: &PhaseVector,
    assignment: &QubitAssignment,
) -> Result<QuantumState> {
    if assignment.n_qubits() != state.n_qubits() {
        return Err(Error::LengthMismatch {
            what: "qubit assignment",
            expected: state.n_qubits(),
            got: assignment.n_qubits(),
        });
    }
    if assignment.n_nodes() > phases.len() {
        return Err(Error::LengthMismatch {
            what: "phase vector",
            expected: assignment.n_nodes(),
            got: phases.len(),
        });
    }
    phases.validate()?;
    let diag = phase_generator_diagonal(assignment, &phases.0);
    Ok(apply_phase_diagonal(state, &diag, 1.0))
}

/// e^{i t G} for a diagonal generator G.
pub(crate) fn apply_phase_diagonal(state: &QuantumState, diag: &[f64], t: f64) -> QuantumState {
    if let Some(amps) = state.amplitudes() {
        let mut out = amps.clone();
        for (x, a) in out.iter_mut().enumerate() {
            *a *= C64::from_polar(1.0, t * diag[x]);
        }
        QuantumState::pure_unchecked(out)
    } else {
        let mut rho = state.matrix().expect("mixed state").clone();
        for x in 0..rho.nrows() {
            for y in 0..rho.ncols() {
                rho[(x, y)] *= C64::from_polar(1.0, t * (diag[x] - diag[y]));
            }
        }
        QuantumState::mixed_unchecked(rho)
    }
}

/// Hiding assignment: every honest node except `target_j` moves to
/// -theta_j/(n_honest - 1); dishonest entries and theta_j itself stay.
pub fn privacy_substitution(
    phases: &PhaseVector,
    target_j: usize,
    honest: &[usize],
) -> Result<PhaseVector> {
    if honest.len() < 2 {
        return Err(Error::HonestSetTooSmall {
            min: 2,
            got: honest.len(),
        });
    }
    if !honest.contains(&target_j) {
        return Err(Error::NodeIndexOutOfRange {
            index: target_j,
            n_nodes: phases.len(),
        });
    }
    if target_j >= phases.len() {
        return Err(Error::NodeIndexOutOfRange {
            index: target_j,
            n_nodes: phases.len(),
        });
    }
    let hidden = -phases.0[target_j] / (honest.len() as f64 - 1.0);
    let mut out = phases.clone();
    for &k in honest {
        if k != target_j {
            out.0[k] = hidden;
        }
    }
    Ok(out)
}

/// GHZ resource over sum |k_i| qubits, X applied on qubits of
/// negative-weight nodes, plus the matching qubit assignment.
pub fn resource_state_for_function(
    spec: &LinearFunctionSpec,
) -> Result<(QuantumState, QubitAssignment)> {
    let total = spec.total_qubits();
    if total == 0 {
        return Err(Error::AllWeightsZero);
    }
    if total > tol::QUBIT_CAP_DEFAULT {
        return Err(Error::QubitCapExceeded {
            requested: total,
            cap: tol::QUBIT_CAP_DEFAULT,
        });
    }
    let assignment = QubitAssignment::for_function(spec)?;
    let base = ghz::ghz_state(total)?;
    // X on the flagged qubits maps the branch pair |0..0>,|1..1> to the
    // complementary pair with flagged bits flipped; amplitudes stay 1/sqrt2.
    let mut flip_mask = 0usize;
    for (q, slot) in assignment.slots().iter().enumerate() {
        if slot.x_conjugated {
            flip_mask |= 1usize << (total - 1 - q);
        }
    }
    let state = if flip_mask == 0 {
        base
    } else {
        let amps_in = base.amplitudes().expect("ghz is pure");
        let mut amps = vec![C64::default(); amps_in.len()];
        for (i, &a) in amps_in.iter().enumerate() {
            amps[i ^ flip_mask] = a;
        }
        QuantumState::pure_from_slice(&amps)?
    };
    Ok((state, assignment))
}

/// Exact value of f(Theta) = scale * sum_i weights[i] * theta_i.
pub fn function_value(spec: &LinearFunctionSpec, phases: &PhaseVector) -> Result<f64> {
    if spec.weights.len() != phases.len() {
        return Err(Error::LengthMismatch {
            what: "phase vector",
            expected: spec.weights.len(),
            got: phases.len(),
        });
    }
    let sum: f64 = spec
        .weights
        .iter()
        .zip(&phases.0)
        .map(|(&k, &t)| k as f64 * t)
        .sum();
    Ok(spec.scale * sum)
}
