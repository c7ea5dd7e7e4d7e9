//! Numeric tolerances used by state and operator invariant checks.
//!
//! These are deliberately centralized: every construction-time check and
//! every "is this still normalized" assertion reads from here, so the
//! simulator has one notion of "equal up to floating point".

/// Pure-state norm, density-matrix trace, hermiticity of stored matrices.
pub const STATE_TOL: f64 = 1e-12;

/// Most negative eigenvalue a density matrix may show before we call it
/// invalid rather than rounding noise.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Unitarity check in apply_unitary.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Max-norm reconstruction error allowed for a spectral decomposition.
pub const SPECTRAL_RECONSTRUCTION_TOL: f64 = 1e-10;

/// Kraus completeness: max deviation of sum K^dag K from identity.
pub const KRAUS_TOL: f64 = 1e-10;

/// Residual allowed in the symmetric-logarithmic-derivative defining
/// equation on the retained support.
pub const SLD_RESIDUAL_TOL: f64 = 1e-8;

/// Default truncation tolerance on eigenvalue pair sums in the spectral
/// Fisher-information formula.
pub const QFI_TRUNCATION_TOL: f64 = 1e-10;

/// Default central-difference step for black-box state families.
pub const FD_STEP_DEFAULT: f64 = 1e-5;

/// Dense simulation refuses to allocate past this many qubits.
pub const QUBIT_CAP_DEFAULT: usize = 12;
