//! Dense multi-qubit states and operators.
//!
//! Indexing convention: qubit 0 is the most significant bit of a basis
//! index, so `tensor(a, b)` concatenates `a`'s qubits in front of `b`'s.
//! Everything is dense; the qubit cap in [`crate::tol`] keeps allocations
//! honest.

mod operator;
mod state;

pub use operator::{operator_inf_norm, LinearOperator, SpectralDecomposition};
pub use state::{
    apply_channel, apply_unitary, expectation, fidelity, partial_trace, sample_eigenvalue,
    tensor, QuantumState,
};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;

/// Position mask of `qubit` inside an `n`-qubit basis index.
#[inline]
pub(crate) fn bit_mask(n: usize, qubit: usize) -> usize {
    1 << (n - 1 - qubit)
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Max-norm distance from the matrix to its own conjugate transpose.
pub(crate) fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let mut dev = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Number of qubits for a dimension that must be a power of two.
pub(crate) fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return None;
    }
    Some(dim.trailing_zeros() as usize)
}
