use nalgebra::DMatrix;

use super::{hermiticity_deviation, max_abs, qubits_for_dim, C64};
use crate::error::{Error, Result};
use crate::tol;

/// Dense operator on an n-qubit register.
///
/// The hermitian flag is tri-state: `Some(true)` was checked at
/// construction, `None` means nobody asked yet.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    n_qubits: usize,
    matrix: DMatrix<C64>,
    hermitian: Option<bool>,
}

impl LinearOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let n_qubits = qubits_for_dim(matrix.nrows()).ok_or(Error::DimensionMismatch {
            expected: matrix.nrows().next_power_of_two().max(2),
            got: matrix.nrows(),
        })?;
        Ok(Self {
            n_qubits,
            matrix,
            hermitian: None,
        })
    }

    /// Construct with a hermiticity check; the flag is then trusted.
    pub fn hermitian(matrix: DMatrix<C64>) -> Result<Self> {
        let mut op = Self::new(matrix)?;
        let dev = hermiticity_deviation(&op.matrix);
        if dev > tol::STATE_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        op.hermitian = Some(true);
        Ok(op)
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            matrix: DMatrix::identity(1 << n_qubits, 1 << n_qubits),
            hermitian: Some(true),
        }
    }

    /// diag(1, e^{i theta}): the local encoding gate U(theta).
    pub fn phase_gate(theta: f64) -> Self {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(1, 1)] = C64::from_polar(1.0, theta);
        Self {
            n_qubits: 1,
            matrix: m,
            hermitian: None,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        match self.hermitian {
            Some(flag) => flag,
            None => hermiticity_deviation(&self.matrix) <= tol::STATE_TOL,
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// Max-norm deviation of U^dag U from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let eye = DMatrix::<C64>::identity(gram.nrows(), gram.ncols());
        max_abs(&(gram - eye))
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self {
            n_qubits: self.n_qubits + other.n_qubits,
            matrix: self.matrix.kronecker(&other.matrix),
            hermitian: match (self.hermitian, other.hermitian) {
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            n_qubits: self.n_qubits,
            matrix: &self.matrix * C64::new(factor, 0.0),
            hermitian: self.hermitian,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            matrix: &self.matrix + &other.matrix,
            hermitian: match (self.hermitian, other.hermitian) {
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
        })
    }
}

/// Largest singular value of a hermitian operator, i.e. max |eigenvalue|.
pub fn operator_inf_norm(op: &LinearOperator) -> Result<f64> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: hermiticity_deviation(op.matrix()),
        });
    }
    let spec = SpectralDecomposition::new(op.matrix())?;
    Ok(spec
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs())))
}

/// Eigen pairs of a hermitian matrix, eigenvalues descending, eigenvectors
/// as orthonormal columns in matching order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn new(matrix: &DMatrix<C64>) -> Result<Self> {
        let dev = hermiticity_deviation(matrix);
        if dev > tol::SPECTRAL_RECONSTRUCTION_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        // Symmetrize so the solver sees an exactly hermitian input.
        let sym = (matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(sym);
        let dim = matrix.nrows();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::<C64>::zeros(dim, dim);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }

        let decomp = Self {
            eigenvalues,
            vectors,
        };
        let err = max_abs(&(decomp.reconstruct() - matrix));
        if err > tol::SPECTRAL_RECONSTRUCTION_TOL {
            return Err(Error::InvalidState(format!(
                "spectral reconstruction error {err:.3e} exceeds tolerance"
            )));
        }
        Ok(decomp)
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        let dim = self.vectors.nrows();
        let mut diag = DMatrix::<C64>::zeros(dim, dim);
        for (k, &v) in self.eigenvalues.iter().enumerate() {
            diag[(k, k)] = C64::new(v, 0.0);
        }
        &self.vectors * diag * self.vectors.adjoint()
    }
}
