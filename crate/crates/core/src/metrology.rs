//! Fisher-information machinery: how much a measurement can reveal about
//! one phase, and how well a hiding assignment of the other phases can
//! suppress that.
//!
//! Three independent routes to the same quantity are kept on purpose.
//! The pure-state formula and the spectral formula are the workhorses;
//! the Bures finite-difference oracle exists so tests can catch a bug in
//! either without trusting the other.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::encoding::{
    self, apply_phase_diagonal, phase_generator_diagonal, PhaseVector, QubitAssignment,
};
use crate::error::{Error, Result};
use crate::qcore::{self, C64, LinearOperator, QuantumState, SpectralDecomposition};
use crate::tol;

type StateFn = Box<dyn Fn(f64) -> QuantumState>;

/// One-parameter family of states.
///
/// Phase-encoded families carry their generator diagonal and admit exact
/// derivatives; black-box families are differentiated numerically.
pub enum ParameterizedFamily {
    PhaseEncoded {
        /// State at `base_point`.
        base: QuantumState,
        /// Diagonal generator G; the family is e^{i (t - base) G} applied
        /// to `base`.
        generator_diag: Vec<f64>,
        base_point: f64,
    },
    BlackBox {
        state_fn: StateFn,
        base_point: f64,
    },
}

impl ParameterizedFamily {
    /// Family obtained by moving the node phases along `direction` on top
    /// of an already-encoded state.
    pub fn along_direction(
        encoded: QuantumState,
        assignment: &QubitAssignment,
        direction: &[f64],
    ) -> Result<Self> {
        if assignment.n_qubits() != encoded.n_qubits() {
            return Err(Error::LengthMismatch {
                what: "qubit assignment",
                expected: encoded.n_qubits(),
                got: assignment.n_qubits(),
            });
        }
        if assignment.n_nodes() > direction.len() {
            return Err(Error::LengthMismatch {
                what: "direction vector",
                expected: assignment.n_nodes(),
                got: direction.len(),
            });
        }
        Ok(Self::PhaseEncoded {
            base: encoded,
            generator_diag: phase_generator_diagonal(assignment, direction),
            base_point: 0.0,
        })
    }

    pub fn from_diagonal(base: QuantumState, generator_diag: Vec<f64>) -> Self {
        Self::PhaseEncoded {
            base,
            generator_diag,
            base_point: 0.0,
        }
    }

    pub fn black_box(state_fn: impl Fn(f64) -> QuantumState + 'static, base_point: f64) -> Self {
        Self::BlackBox {
            state_fn: Box::new(state_fn),
            base_point,
        }
    }

    pub fn base_point(&self) -> f64 {
        match self {
            Self::PhaseEncoded { base_point, .. } | Self::BlackBox { base_point, .. } => {
                *base_point
            }
        }
    }

    pub fn state_at(&self, t: f64) -> QuantumState {
        match self {
            Self::PhaseEncoded {
                base,
                generator_diag,
                base_point,
            } => apply_phase_diagonal(base, generator_diag, t - base_point),
            Self::BlackBox { state_fn, .. } => state_fn(t),
        }
    }

    pub fn base_state(&self) -> QuantumState {
        self.state_at(self.base_point())
    }

    fn analytic_derivative(&self) -> Option<DMatrix<C64>> {
        match self {
            Self::PhaseEncoded {
                base,
                generator_diag,
                ..
            } => {
                let rho = base.density_matrix();
                let mut out = rho.clone();
                for x in 0..rho.nrows() {
                    for y in 0..rho.ncols() {
                        out[(x, y)] =
                            C64::new(0.0, generator_diag[x] - generator_diag[y]) * rho[(x, y)];
                    }
                }
                Some(out)
            }
            Self::BlackBox { .. } => None,
        }
    }
}

impl std::fmt::Debug for ParameterizedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::PhaseEncoded { base, .. } => f
                .debug_struct("PhaseEncoded")
                .field("n_qubits", &base.n_qubits())
                .finish_non_exhaustive(),
            Self::BlackBox { base_point, .. } => f
                .debug_struct("BlackBox")
                .field("base_point", base_point)
                .finish_non_exhaustive(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QfiMethod {
    PureFormula,
    FullRankFormula,
    SpectralGeneral,
    BuresOracle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QfiResult {
    pub value: f64,
    pub method: QfiMethod,
    /// Eigenvalues of the state above the truncation tolerance; absent
    /// for methods that never decompose the state.
    pub rank_used: Option<usize>,
    pub truncation_tolerance: Option<f64>,
    /// Derivative weight |<k|drho|l>|^2 that fell on truncated pairs.
    pub excluded_derivative_weight: f64,
}

impl QfiResult {
    fn clipped(value: f64, method: QfiMethod) -> Self {
        debug_assert!(value > -1e-9, "QFI {value} below clip window");
        Self {
            value: value.max(0.0),
            method,
            rank_used: None,
            truncation_tolerance: None,
            excluded_derivative_weight: 0.0,
        }
    }
}

/// Central finite difference of the density matrix at the base point.
/// The result must come out hermitian and traceless up to an
/// O(step^2)-scaled tolerance or the family itself is broken.
pub fn state_derivative(family: &ParameterizedFamily, step: f64) -> Result<DMatrix<C64>> {
    if step <= 0.0 {
        return Err(Error::NonPositiveStep(step));
    }
    let t0 = family.base_point();
    let plus = family.state_at(t0 + step).density_matrix();
    let minus = family.state_at(t0 - step).density_matrix();
    let d = (plus - minus) / C64::new(2.0 * step, 0.0);

    let tolerance = (10.0 * step * step).max(1e-10);
    let herm = qcore::hermiticity_deviation(&d);
    if herm > tolerance {
        return Err(Error::NotHermitian { deviation: herm });
    }
    let trace = d.trace();
    if trace.norm() > tolerance {
        return Err(Error::InvalidState(format!(
            "state derivative has trace {trace}, expected 0"
        )));
    }
    Ok(d)
}

fn derivative_matrix(family: &ParameterizedFamily, step: f64) -> Result<DMatrix<C64>> {
    match family.analytic_derivative() {
        Some(d) => Ok(d),
        None => state_derivative(family, step),
    }
}

/// Symmetric logarithmic derivative L with drho = (L rho + rho L)/2 on
/// the support retained by `tolerance`.
pub fn sld(rho: &QuantumState, drho: &DMatrix<C64>, tolerance: f64) -> Result<LinearOperator> {
    let dev = qcore::hermiticity_deviation(drho);
    if dev > 1e-8 {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let rho_m = rho.density_matrix();
    if drho.nrows() != rho_m.nrows() {
        return Err(Error::DimensionMismatch {
            expected: rho_m.nrows(),
            got: drho.nrows(),
        });
    }
    let spec = SpectralDecomposition::new(&rho_m)?;
    let lambda: Vec<f64> = spec.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let d_eig = spec.vectors.adjoint() * drho * &spec.vectors;

    let dim = rho_m.nrows();
    let mut l_eig = DMatrix::<C64>::zeros(dim, dim);
    let mut retained = 0usize;
    for k in 0..dim {
        for l in 0..dim {
            let denom = lambda[k] + lambda[l];
            if denom > tolerance {
                l_eig[(k, l)] = C64::new(2.0, 0.0) * d_eig[(k, l)] / C64::new(denom, 0.0);
                retained += 1;
            }
        }
    }
    if retained == 0 {
        return Err(Error::AllPairsTruncated { tolerance });
    }

    // Defining-equation residual, checked pairwise where the inverse was
    // actually taken.
    let mut residual = 0.0_f64;
    for k in 0..dim {
        for l in 0..dim {
            let denom = lambda[k] + lambda[l];
            if denom > tolerance {
                let back = l_eig[(k, l)] * C64::new(denom / 2.0, 0.0);
                residual = residual.max((back - d_eig[(k, l)]).norm());
            }
        }
    }
    if residual > tol::SLD_RESIDUAL_TOL {
        return Err(Error::InvalidState(format!(
            "SLD residual {residual:.3e} on retained support"
        )));
    }

    let l_full = &spec.vectors * l_eig * spec.vectors.adjoint();
    let sym = (&l_full + l_full.adjoint()) * C64::new(0.5, 0.0);
    LinearOperator::hermitian(sym)
}

/// 4(<dpsi|dpsi> - |<psi|dpsi>|^2) for families of pure states.
pub fn qfi_pure(family: &ParameterizedFamily) -> Result<QfiResult> {
    match family {
        ParameterizedFamily::PhaseEncoded {
            base,
            generator_diag,
            ..
        } => {
            let amps = base.amplitudes().ok_or(Error::NotPureFamily)?;
            let mut mean = 0.0;
            let mut mean_sq = 0.0;
            for (x, a) in amps.iter().enumerate() {
                let w = a.norm_sqr();
                mean += generator_diag[x] * w;
                mean_sq += generator_diag[x] * generator_diag[x] * w;
            }
            let mut result = QfiResult::clipped(4.0 * (mean_sq - mean * mean), QfiMethod::PureFormula);
            result.rank_used = Some(1);
            Ok(result)
        }
        ParameterizedFamily::BlackBox { .. } => {
            let t0 = family.base_point();
            let h = tol::FD_STEP_DEFAULT;
            let psi0 = family
                .state_at(t0)
                .amplitudes()
                .cloned()
                .ok_or(Error::NotPureFamily)?;
            let psi_plus = family
                .state_at(t0 + h)
                .amplitudes()
                .cloned()
                .ok_or(Error::NotPureFamily)?;
            let psi_minus = family
                .state_at(t0 - h)
                .amplitudes()
                .cloned()
                .ok_or(Error::NotPureFamily)?;
            // Pin the gauge: rotate each neighbor so its overlap with the
            // base state is real positive, otherwise an arbitrary global
            // phase contaminates the difference quotient.
            let align = |psi: DVector<C64>, reference: &DVector<C64>| -> DVector<C64> {
                let ov = reference.dotc(&psi);
                if ov.norm() < 1e-300 {
                    return psi;
                }
                psi * (ov.conj() / C64::new(ov.norm(), 0.0))
            };
            let psi_plus = align(psi_plus, &psi0);
            let psi_minus = align(psi_minus, &psi0);
            let dpsi = (psi_plus - psi_minus) / C64::new(2.0 * h, 0.0);
            let dd = dpsi.dotc(&dpsi).re;
            let overlap = psi0.dotc(&dpsi).norm_sqr();
            let mut result = QfiResult::clipped(4.0 * (dd - overlap), QfiMethod::PureFormula);
            result.rank_used = Some(1);
            Ok(result)
        }
    }
}

/// Spectral formula 2 sum |<k|drho|l>|^2/(lambda_k + lambda_l) over
/// eigenvalue pairs above `tolerance`.
pub fn qfi_mixed(family: &ParameterizedFamily, tolerance: f64) -> Result<QfiResult> {
    let rho = family.base_state().density_matrix();
    let drho = derivative_matrix(family, tol::FD_STEP_DEFAULT)?;
    let spec = SpectralDecomposition::new(&rho)?;
    let lambda: Vec<f64> = spec.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let d_eig = spec.vectors.adjoint() * &drho * &spec.vectors;

    let dim = rho.nrows();
    let mut value = 0.0_f64;
    let mut retained_weight = 0.0_f64;
    let mut excluded_weight = 0.0_f64;
    let mut all_retained = true;
    for k in 0..dim {
        for l in 0..dim {
            let denom = lambda[k] + lambda[l];
            let w = d_eig[(k, l)].norm_sqr();
            if denom > tolerance {
                value += 2.0 * w / denom;
                retained_weight += w;
            } else {
                excluded_weight += w;
                all_retained = false;
            }
        }
    }
    if retained_weight <= 0.0 && excluded_weight > tolerance {
        return Err(Error::DerivativeOnTruncatedSupport {
            excluded: excluded_weight,
            tolerance,
        });
    }
    let rank_used = lambda.iter().filter(|&&l| l > tolerance).count();
    Ok(QfiResult {
        value: value.max(0.0),
        method: if all_retained {
            QfiMethod::FullRankFormula
        } else {
            QfiMethod::SpectralGeneral
        },
        rank_used: Some(rank_used),
        truncation_tolerance: Some(tolerance),
        excluded_derivative_weight: excluded_weight,
    })
}

/// Dispatch on the family's kind at the base point.
pub fn qfi_auto(family: &ParameterizedFamily, tolerance: f64) -> Result<QfiResult> {
    if family.base_state().is_pure() {
        qfi_pure(family)
    } else {
        qfi_mixed(family, tolerance)
    }
}

/// Independent oracle: 8(1 - sqrt F(rho_t, rho_{t+step}))/step^2.
pub fn qfi_bures_oracle(family: &ParameterizedFamily, step: f64) -> Result<QfiResult> {
    if step <= 0.0 {
        return Err(Error::NonPositiveStep(step));
    }
    let t0 = family.base_point();
    let here = family.state_at(t0);
    let there = family.state_at(t0 + step);
    let f = qcore::fidelity(&here, &there)?;
    if f <= 0.5 {
        return Err(Error::InvalidState(format!(
            "step {step} moves the state too far (fidelity {f:.4}); shrink it"
        )));
    }
    Ok(QfiResult::clipped(
        8.0 * (1.0 - f.sqrt()) / (step * step),
        QfiMethod::BuresOracle,
    ))
}

/// How far apart the Fisher information of two states can be, given
/// their fidelity and the encoding generator's norm: 24 h^2 sqrt(1-f).
pub fn continuity_bound(f: f64, h_norm: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&f) {
        return Err(Error::FidelityOutOfRange(f));
    }
    let defect = (1.0 - f).max(0.0);
    Ok(24.0 * h_norm * h_norm * defect.sqrt())
}

/// Norm bound for the effective generator after a hiding substitution:
/// the target node contributes base_h_norm and the co-moving nodes
/// another base_h_norm via the triangle inequality, total 2x.
pub fn hiding_generator_norm_bound(n: usize, base_h_norm: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    Ok(2.0 * base_h_norm)
}

/// Per-node outcome of the hiding analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodePrivacy {
    pub node: usize,
    /// min(co-varying, frozen) Fisher information, over the honest count
    /// squared.
    pub epsilon: f64,
    pub qfi_covarying: f64,
    pub qfi_frozen: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrivacyAssessment {
    /// max over honest nodes of the per-node epsilon.
    pub epsilon: f64,
    pub worst_node: usize,
    pub per_node: Vec<NodePrivacy>,
}

/// How much Fisher information about any single honest phase survives the
/// best hiding assignment, normalized by (honest count)^2.
///
/// Two hiding strategies are evaluated per node and the smaller wins:
/// the co-varying substitution (spectator phases track -theta_j/(n-1) as
/// theta_j moves, which erases the signal on phase-sum states) and frozen
/// spectators (only theta_j moves, which is optimal for product states).
pub fn privacy_epsilon(
    state: &QuantumState,
    assignment: &QubitAssignment,
    phases: &PhaseVector,
    honest: &[usize],
    tolerance: f64,
) -> Result<PrivacyAssessment> {
    if honest.len() < 2 {
        return Err(Error::HonestSetTooSmall {
            min: 2,
            got: honest.len(),
        });
    }
    let mut honest_qubits: Vec<usize> = (0..assignment.n_qubits())
        .filter(|&q| honest.contains(&assignment.owner(q)))
        .collect();
    honest_qubits.sort_unstable();
    if honest_qubits.is_empty() {
        return Err(Error::NoHonestQubits);
    }

    let reduced = qcore::partial_trace(state, &honest_qubits)?;
    let reduced_assignment = assignment.restrict(&honest_qubits);
    let n_honest = honest.len() as f64;
    let n_nodes = phases.len();

    let mut per_node = Vec::with_capacity(honest.len());
    for &j in honest {
        let substituted = encoding::privacy_substitution(phases, j, honest)?;
        let encoded = encoding::encode_network(&reduced, &substituted, &reduced_assignment)?;

        let mut covary = vec![0.0; n_nodes];
        covary[j] = 1.0;
        for &k in honest {
            if k != j {
                covary[k] = -1.0 / (n_honest - 1.0);
            }
        }
        let mut frozen = vec![0.0; n_nodes];
        frozen[j] = 1.0;

        let qfi_of = |direction: &[f64]| -> Result<f64> {
            let family = ParameterizedFamily::along_direction(
                encoded.clone(),
                &reduced_assignment,
                direction,
            )?;
            Ok(qfi_auto(&family, tolerance)?.value)
        };
        let qfi_covarying = qfi_of(&covary)?;
        let qfi_frozen = qfi_of(&frozen)?;
        per_node.push(NodePrivacy {
            node: j,
            epsilon: qfi_covarying.min(qfi_frozen) / (n_honest * n_honest),
            qfi_covarying,
            qfi_frozen,
        });
    }

    let worst = per_node
        .iter()
        .max_by(|a, b| a.epsilon.total_cmp(&b.epsilon))
        .expect("honest set nonempty");
    Ok(PrivacyAssessment {
        epsilon: worst.epsilon,
        worst_node: worst.node,
        per_node: per_node.clone(),
    })
}

/// 1/(nu * qfi); callers must check qfi > 0 themselves or handle the error.
pub fn cramer_rao_bound(qfi: f64, nu: usize) -> Result<f64> {
    if qfi <= 0.0 {
        return Err(Error::NonPositiveQfi(qfi));
    }
    if nu == 0 {
        return Err(Error::ZeroRounds);
    }
    Ok(1.0 / (nu as f64 * qfi))
}
