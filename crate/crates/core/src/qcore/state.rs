use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::operator::{LinearOperator, SpectralDecomposition};
use super::{bit_mask, hermiticity_deviation, qubits_for_dim, C64};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::tol;

#[derive(Debug, Clone)]
enum StateData {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// Dense n-qubit state, either a unit vector or a density matrix.
#[derive(Debug, Clone)]
pub struct QuantumState {
    n_qubits: usize,
    data: StateData,
}

impl QuantumState {
    pub fn pure(amplitudes: DVector<C64>) -> Result<Self> {
        let n_qubits = check_dim(amplitudes.len())?;
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > tol::STATE_TOL {
            return Err(Error::InvalidState(format!(
                "pure state norm^2 = {norm_sq}, must be 1"
            )));
        }
        Ok(Self {
            n_qubits,
            data: StateData::Pure(amplitudes),
        })
    }

    pub fn pure_from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::pure(DVector::from_column_slice(amplitudes))
    }

    /// Full validation: hermiticity, unit trace, eigenvalue floor.
    pub fn mixed(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let n_qubits = check_dim(matrix.nrows())?;
        let herm = hermiticity_deviation(&matrix);
        if herm > tol::STATE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix hermiticity deviation {herm:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol::STATE_TOL || trace.im.abs() > tol::STATE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {trace}, must be 1"
            )));
        }
        let spec = SpectralDecomposition::new(&matrix)?;
        if let Some(&min) = spec
            .eigenvalues
            .iter()
            .min_by(|a, b| a.total_cmp(b))
        {
            if min < tol::EIGENVALUE_FLOOR {
                return Err(Error::InvalidState(format!(
                    "density matrix has eigenvalue {min:.3e} below the floor"
                )));
            }
        }
        Ok(Self {
            n_qubits,
            data: StateData::Mixed(matrix),
        })
    }

    /// For internal operations whose outputs are valid by construction.
    pub(crate) fn mixed_unchecked(matrix: DMatrix<C64>) -> Self {
        debug_assert!(hermiticity_deviation(&matrix) <= 1e-9);
        debug_assert!((matrix.trace().re - 1.0).abs() <= 1e-9);
        let n_qubits = qubits_for_dim(matrix.nrows()).expect("internal state dim");
        Self {
            n_qubits,
            data: StateData::Mixed(matrix),
        }
    }

    pub(crate) fn pure_unchecked(amplitudes: DVector<C64>) -> Self {
        debug_assert!(
            (amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs() <= 1e-9
        );
        let n_qubits = qubits_for_dim(amplitudes.len()).expect("internal state dim");
        Self {
            n_qubits,
            data: StateData::Pure(amplitudes),
        }
    }

    /// Computational basis state |index> on n qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::QubitIndexOutOfRange {
                index,
                n_qubits,
            });
        }
        let mut amps = DVector::zeros(dim);
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            data: StateData::Pure(amps),
        })
    }

    pub fn all_zeros(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// |+>^(x n): the separable benchmark state.
    pub fn plus_product(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        let amp = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(Self {
            n_qubits,
            data: StateData::Pure(DVector::from_element(dim, amp)),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.data, StateData::Pure(_))
    }

    pub fn amplitudes(&self) -> Option<&DVector<C64>> {
        match &self.data {
            StateData::Pure(v) => Some(v),
            StateData::Mixed(_) => None,
        }
    }

    pub fn matrix(&self) -> Option<&DMatrix<C64>> {
        match &self.data {
            StateData::Mixed(m) => Some(m),
            StateData::Pure(_) => None,
        }
    }

    /// Density matrix view regardless of kind (builds |psi><psi| if pure).
    pub fn density_matrix(&self) -> DMatrix<C64> {
        match &self.data {
            StateData::Pure(v) => {
                let dim = v.len();
                let mut m = DMatrix::zeros(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        m[(i, j)] = v[i] * v[j].conj();
                    }
                }
                m
            }
            StateData::Mixed(m) => m.clone(),
        }
    }

    pub fn to_mixed(&self) -> Self {
        match &self.data {
            StateData::Pure(_) => Self {
                n_qubits: self.n_qubits,
                data: StateData::Mixed(self.density_matrix()),
            },
            StateData::Mixed(_) => self.clone(),
        }
    }

    /// Tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        match &self.data {
            StateData::Pure(_) => 1.0,
            StateData::Mixed(m) => {
                let mut acc = 0.0;
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        acc += (m[(i, j)] * m[(j, i)]).re;
                    }
                }
                acc
            }
        }
    }
}

fn check_qubit_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::TooFewNodes { min: 1, got: 0 });
    }
    if n_qubits > tol::QUBIT_CAP_DEFAULT {
        return Err(Error::QubitCapExceeded {
            requested: n_qubits,
            cap: tol::QUBIT_CAP_DEFAULT,
        });
    }
    Ok(())
}

fn check_dim(dim: usize) -> Result<usize> {
    let n_qubits = qubits_for_dim(dim).ok_or(Error::DimensionMismatch {
        expected: dim.next_power_of_two().max(2),
        got: dim,
    })?;
    check_qubit_count(n_qubits)?;
    Ok(n_qubits)
}

/// Kronecker product; both operands must share a kind.
pub fn tensor(a: &QuantumState, b: &QuantumState) -> Result<QuantumState> {
    let total = a.n_qubits() + b.n_qubits();
    if total > tol::QUBIT_CAP_DEFAULT {
        return Err(Error::QubitCapExceeded {
            requested: total,
            cap: tol::QUBIT_CAP_DEFAULT,
        });
    }
    match (&a.data, &b.data) {
        (StateData::Pure(va), StateData::Pure(vb)) => {
            Ok(QuantumState::pure_unchecked(va.kronecker(vb)))
        }
        (StateData::Mixed(ma), StateData::Mixed(mb)) => {
            Ok(QuantumState::mixed_unchecked(ma.kronecker(mb)))
        }
        _ => Err(Error::KindMismatch),
    }
}

/// Offsets used to address a local operator acting on `qubits`.
///
/// `sub` has one entry per local basis index (qubits in the given order,
/// first listed = most significant); `rest` enumerates every pattern of
/// the untouched qubits.
fn local_offsets(n: usize, qubits: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let k = qubits.len();
    let masks: Vec<usize> = qubits.iter().map(|&q| bit_mask(n, q)).collect();
    let mut sub = vec![0usize; 1 << k];
    for (s, slot) in sub.iter_mut().enumerate() {
        let mut off = 0;
        for (t, &mask) in masks.iter().enumerate() {
            if (s >> (k - 1 - t)) & 1 == 1 {
                off |= mask;
            }
        }
        *slot = off;
    }
    let union: usize = masks.iter().fold(0, |acc, &m| acc | m);
    let free: Vec<usize> = (0..n)
        .map(|q| bit_mask(n, q))
        .filter(|m| union & m == 0)
        .collect();
    let mut rest = Vec::with_capacity(1 << free.len());
    for r in 0..(1usize << free.len()) {
        let mut off = 0;
        for (t, &mask) in free.iter().enumerate() {
            if (r >> t) & 1 == 1 {
                off |= mask;
            }
        }
        rest.push(off);
    }
    (sub, rest)
}

fn apply_local_to_amps(amps: &mut [C64], m: &DMatrix<C64>, sub: &[usize], rest: &[usize]) {
    let dk = sub.len();
    let mut gathered = vec![C64::default(); dk];
    for &base in rest {
        for (s, &off) in sub.iter().enumerate() {
            gathered[s] = amps[base | off];
        }
        for (i, &off_i) in sub.iter().enumerate() {
            let mut acc = C64::default();
            for (j, &g) in gathered.iter().enumerate() {
                acc += m[(i, j)] * g;
            }
            amps[base | off_i] = acc;
        }
    }
}

/// rho -> M rho M^dag without materializing the embedded operator.
fn sandwich(rho: &mut DMatrix<C64>, m: &DMatrix<C64>, sub: &[usize], rest: &[usize]) {
    let dim = rho.nrows();
    let mut buf = vec![C64::default(); dim];
    // Left multiply: each column is a vector under M.
    for c in 0..dim {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = rho[(i, c)];
        }
        apply_local_to_amps(&mut buf, m, sub, rest);
        for (i, &v) in buf.iter().enumerate() {
            rho[(i, c)] = v;
        }
    }
    // Right multiply by M^dag: each row transforms under conj(M).
    let mconj = m.map(|z| z.conj());
    for r in 0..dim {
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = rho[(r, j)];
        }
        apply_local_to_amps(&mut buf, &mconj, sub, rest);
        for (j, &v) in buf.iter().enumerate() {
            rho[(r, j)] = v;
        }
    }
}

fn check_qubit_list(n: usize, qubits: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    for &q in qubits {
        if q >= n {
            return Err(Error::QubitIndexOutOfRange {
                index: q,
                n_qubits: n,
            });
        }
        if seen[q] {
            return Err(Error::DuplicateQubitIndex(q));
        }
        seen[q] = true;
    }
    Ok(())
}

/// Apply a unitary to the listed qubits (first listed qubit = most
/// significant bit of the operator's own index space).
pub fn apply_unitary(
    state: &QuantumState,
    u: &LinearOperator,
    qubits: &[usize],
) -> Result<QuantumState> {
    let n = state.n_qubits();
    check_qubit_list(n, qubits)?;
    if u.n_qubits() != qubits.len() {
        return Err(Error::DimensionMismatch {
            expected: 1 << qubits.len(),
            got: u.dim(),
        });
    }
    let dev = u.unitarity_deviation();
    if dev > tol::UNITARITY_TOL {
        return Err(Error::NotUnitary { deviation: dev });
    }
    let (sub, rest) = local_offsets(n, qubits);
    match &state.data {
        StateData::Pure(v) => {
            let mut amps = v.clone();
            apply_local_to_amps(amps.as_mut_slice(), u.matrix(), &sub, &rest);
            Ok(QuantumState::pure_unchecked(amps))
        }
        StateData::Mixed(m) => {
            let mut rho = m.clone();
            sandwich(&mut rho, u.matrix(), &sub, &rest);
            Ok(QuantumState::mixed_unchecked(rho))
        }
    }
}

/// Apply a CPTP map given by Kraus operators to the listed qubits.
/// The output is always a density matrix.
pub fn apply_channel(
    state: &QuantumState,
    kraus: &[DMatrix<C64>],
    qubits: &[usize],
) -> Result<QuantumState> {
    let n = state.n_qubits();
    check_qubit_list(n, qubits)?;
    if kraus.is_empty() {
        return Err(Error::EmptyInput("Kraus operator list"));
    }
    let dk = 1usize << qubits.len();
    let mut completeness = DMatrix::<C64>::zeros(dk, dk);
    for k in kraus {
        if k.nrows() != dk || k.ncols() != dk {
            return Err(Error::DimensionMismatch {
                expected: dk,
                got: k.nrows(),
            });
        }
        completeness += k.adjoint() * k;
    }
    completeness -= DMatrix::<C64>::identity(dk, dk);
    let dev = super::max_abs(&completeness);
    if dev > tol::KRAUS_TOL {
        return Err(Error::MalformedKraus { deviation: dev });
    }

    let (sub, rest) = local_offsets(n, qubits);
    let rho0 = state.density_matrix();
    let mut out = DMatrix::<C64>::zeros(rho0.nrows(), rho0.ncols());
    for k in kraus {
        let mut term = rho0.clone();
        sandwich(&mut term, k, &sub, &rest);
        out += term;
    }
    Ok(QuantumState::mixed_unchecked(out))
}

/// Reduce to the listed qubits. Output qubit order is ascending original
/// index regardless of the order given.
pub fn partial_trace(state: &QuantumState, keep: &[usize]) -> Result<QuantumState> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let n = state.n_qubits();
    check_qubit_list(n, keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();

    // Tracing out nothing is the identity; keeping the representation
    // lets pure states stay on the cheap downstream paths.
    if kept.len() == n {
        return Ok(state.clone());
    }

    let k = kept.len();
    let kept_masks: Vec<usize> = kept.iter().map(|&q| bit_mask(n, q)).collect();
    let mut kept_off = vec![0usize; 1 << k];
    for (a, slot) in kept_off.iter_mut().enumerate() {
        let mut off = 0;
        for (t, &mask) in kept_masks.iter().enumerate() {
            if (a >> (k - 1 - t)) & 1 == 1 {
                off |= mask;
            }
        }
        *slot = off;
    }
    let union: usize = kept_masks.iter().fold(0, |acc, &m| acc | m);
    let elim: Vec<usize> = (0..n)
        .map(|q| bit_mask(n, q))
        .filter(|m| union & m == 0)
        .collect();
    let mut elim_off = Vec::with_capacity(1 << elim.len());
    for e in 0..(1usize << elim.len()) {
        let mut off = 0;
        for (t, &mask) in elim.iter().enumerate() {
            if (e >> t) & 1 == 1 {
                off |= mask;
            }
        }
        elim_off.push(off);
    }

    let dim_out = 1usize << k;
    let mut out = DMatrix::<C64>::zeros(dim_out, dim_out);
    match &state.data {
        StateData::Pure(v) => {
            for (a, &ka) in kept_off.iter().enumerate() {
                for (b, &kb) in kept_off.iter().enumerate() {
                    let mut acc = C64::default();
                    for &e in &elim_off {
                        acc += v[ka | e] * v[kb | e].conj();
                    }
                    out[(a, b)] = acc;
                }
            }
        }
        StateData::Mixed(m) => {
            for (a, &ka) in kept_off.iter().enumerate() {
                for (b, &kb) in kept_off.iter().enumerate() {
                    let mut acc = C64::default();
                    for &e in &elim_off {
                        acc += m[(ka | e, kb | e)];
                    }
                    out[(a, b)] = acc;
                }
            }
        }
    }
    Ok(QuantumState::mixed_unchecked(out))
}

/// Squared-convention fidelity: |<a|b>|^2 when both are pure,
/// <psi|rho|psi> for pure versus mixed, (Tr sqrt(sqrt(r1) r2 sqrt(r1)))^2
/// in general.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let value = match (&a.data, &b.data) {
        (StateData::Pure(va), StateData::Pure(vb)) => va.dotc(vb).norm_sqr(),
        (StateData::Pure(v), StateData::Mixed(m)) | (StateData::Mixed(m), StateData::Pure(v)) => {
            let mv = m * v;
            v.dotc(&mv).re
        }
        (StateData::Mixed(ma), StateData::Mixed(mb)) => {
            let sqrt_a = psd_sqrt(ma)?;
            let inner = &sqrt_a * mb * &sqrt_a;
            let spec = SpectralDecomposition::new(&inner)?;
            let root_sum: f64 = spec
                .eigenvalues
                .iter()
                .map(|&l| l.max(0.0).sqrt())
                .sum();
            root_sum * root_sum
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

fn psd_sqrt(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let spec = SpectralDecomposition::new(m)?;
    let dim = m.nrows();
    let mut diag = DMatrix::<C64>::zeros(dim, dim);
    for (k, &l) in spec.eigenvalues.iter().enumerate() {
        diag[(k, k)] = C64::new(l.max(0.0).sqrt(), 0.0);
    }
    Ok(&spec.vectors * diag * spec.vectors.adjoint())
}

/// <O> on the state; the observable must be hermitian.
pub fn expectation(state: &QuantumState, obs: &LinearOperator) -> Result<f64> {
    if obs.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: obs.dim(),
        });
    }
    if !obs.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: hermiticity_deviation(obs.matrix()),
        });
    }
    match &state.data {
        StateData::Pure(v) => {
            let ov = obs.matrix() * v;
            Ok(v.dotc(&ov).re)
        }
        StateData::Mixed(rho) => {
            let o = obs.matrix();
            let mut acc = 0.0;
            for i in 0..o.nrows() {
                for j in 0..o.ncols() {
                    acc += (o[(i, j)] * rho[(j, i)]).re;
                }
            }
            Ok(acc)
        }
    }
}

/// Born-rule measurement of a hermitian observable. Returns the sampled
/// eigenvalue (degenerate levels collapse to one outcome) and the
/// projected post-measurement state.
pub fn sample_eigenvalue(
    state: &QuantumState,
    obs: &LinearOperator,
    rng: &mut SimRng,
) -> Result<(f64, QuantumState)> {
    if obs.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            got: obs.dim(),
        });
    }
    if !obs.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: hermiticity_deviation(obs.matrix()),
        });
    }
    let spec = SpectralDecomposition::new(obs.matrix())?;
    // Bin degenerate eigenvalues; eigenvalues arrive descending.
    let mut clusters: Vec<(f64, Vec<usize>)> = Vec::new();
    for (idx, &l) in spec.eigenvalues.iter().enumerate() {
        match clusters.last_mut() {
            Some((v, members)) if (*v - l).abs() <= 1e-8 => members.push(idx),
            _ => clusters.push((l, vec![idx])),
        }
    }

    let probs: Vec<f64> = clusters
        .iter()
        .map(|(_, members)| match &state.data {
            StateData::Pure(v) => members
                .iter()
                .map(|&k| spec.vectors.column(k).dotc(v).norm_sqr())
                .sum(),
            StateData::Mixed(rho) => members
                .iter()
                .map(|&k| {
                    let col = spec.vectors.column(k);
                    let rc = rho * col;
                    col.dotc(&rc).re
                })
                .sum(),
        })
        .collect();

    let draw: f64 = rng.random();
    let mut cum = 0.0;
    let mut chosen = clusters.len() - 1;
    for (i, &p) in probs.iter().enumerate() {
        cum += p.max(0.0);
        if draw < cum {
            chosen = i;
            break;
        }
    }

    let (value, members) = &clusters[chosen];
    let prob = probs[chosen].max(1e-300);
    let post = match &state.data {
        StateData::Pure(v) => {
            let mut proj = DVector::<C64>::zeros(v.len());
            for &k in members {
                let col = spec.vectors.column(k);
                let amp = col.dotc(v);
                proj += col.clone_owned() * amp;
            }
            let norm = proj.norm();
            QuantumState::pure_unchecked(proj / C64::new(norm, 0.0))
        }
        StateData::Mixed(rho) => {
            let dim = rho.nrows();
            let mut projector = DMatrix::<C64>::zeros(dim, dim);
            for &k in members {
                let col = spec.vectors.column(k);
                for i in 0..dim {
                    for j in 0..dim {
                        projector[(i, j)] += col[i] * col[j].conj();
                    }
                }
            }
            let reduced = &projector * rho * &projector / C64::new(prob, 0.0);
            QuantumState::mixed_unchecked(reduced)
        }
    };
    Ok((*value, post))
}
