//! GHZ resource states and their signed Pauli stabilizers.
//!
//! Generator pattern for n qubits: an all-X row with sign +1, plus n-1
//! rows of sign -1 carrying a sliding YY pair. The pair sits at
//! positions (j, j+1) for the first n-2 rows and wraps to (0, n-1) for
//! the last one. For n = 2 the slide and the wrap coincide, leaving
//! {-YY, +XX}.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{LinearOperator, QuantumState, C64};
use crate::rng::SimRng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PauliLetter {
    I,
    X,
    Y,
    Z,
}

impl PauliLetter {
    /// Action on a basis bit: (output bit, phase).
    #[inline]
    fn act(self, bit: bool) -> (bool, C64) {
        match self {
            PauliLetter::I => (bit, C64::new(1.0, 0.0)),
            PauliLetter::X => (!bit, C64::new(1.0, 0.0)),
            PauliLetter::Y => {
                // Y|0> = i|1>, Y|1> = -i|0>
                if bit {
                    (false, C64::new(0.0, -1.0))
                } else {
                    (true, C64::new(0.0, 1.0))
                }
            }
            PauliLetter::Z => (bit, C64::new(if bit { -1.0 } else { 1.0 }, 0.0)),
        }
    }

    pub fn matrix(self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(2, 2);
        match self {
            PauliLetter::I => {
                m[(0, 0)] = C64::new(1.0, 0.0);
                m[(1, 1)] = C64::new(1.0, 0.0);
            }
            PauliLetter::X => {
                m[(0, 1)] = C64::new(1.0, 0.0);
                m[(1, 0)] = C64::new(1.0, 0.0);
            }
            PauliLetter::Y => {
                m[(0, 1)] = C64::new(0.0, -1.0);
                m[(1, 0)] = C64::new(0.0, 1.0);
            }
            PauliLetter::Z => {
                m[(0, 0)] = C64::new(1.0, 0.0);
                m[(1, 1)] = C64::new(-1.0, 0.0);
            }
        }
        m
    }

    fn symbol(self) -> char {
        match self {
            PauliLetter::I => 'I',
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// Signed Pauli string, e.g. "-YYX". Hermitian and self-inverse as an
/// operator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PauliString {
    sign: i8,
    letters: Vec<PauliLetter>,
}

impl PauliString {
    pub fn new(sign: i8, letters: Vec<PauliLetter>) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidState(format!(
                "Pauli sign must be +1 or -1, got {sign}"
            )));
        }
        if letters.is_empty() {
            return Err(Error::EmptyInput("Pauli letters"));
        }
        Ok(Self { sign, letters })
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn letters(&self) -> &[PauliLetter] {
        &self.letters
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    /// All-X string of positive sign on n qubits.
    pub fn all_x(n: usize) -> Result<Self> {
        Self::new(1, vec![PauliLetter::X; n])
    }

    /// Basis-flip mask and per-index phase of this string acting on |j>.
    /// P|j> = phase(j) |j xor flip_mask>.
    #[inline]
    fn action_on_index(&self, index: usize) -> (usize, C64) {
        let n = self.letters.len();
        let mut out = index;
        let mut phase = C64::new(self.sign as f64, 0.0);
        for (q, letter) in self.letters.iter().enumerate() {
            let mask = 1usize << (n - 1 - q);
            let bit = index & mask != 0;
            let (new_bit, p) = letter.act(bit);
            if new_bit != bit {
                out ^= mask;
            }
            phase *= p;
        }
        (out, phase)
    }

    /// Dense materialization.
    pub fn to_operator(&self) -> LinearOperator {
        let dim = 1usize << self.letters.len();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for j in 0..dim {
            let (i, phase) = self.action_on_index(j);
            m[(i, j)] = phase;
        }
        LinearOperator::hermitian(m).expect("Pauli strings are hermitian")
    }

    /// <P> without building the dense matrix: O(2^n) for pure states,
    /// one pass over the density matrix otherwise.
    pub fn expectation(&self, state: &QuantumState) -> Result<f64> {
        let dim = 1usize << self.letters.len();
        if dim != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: state.dim(),
                got: dim,
            });
        }
        let mut acc = C64::default();
        if let Some(amps) = state.amplitudes() {
            for j in 0..dim {
                let (i, phase) = self.action_on_index(j);
                acc += amps[i].conj() * phase * amps[j];
            }
        } else {
            let rho = state.matrix().expect("mixed state has matrix");
            for j in 0..dim {
                let (i, phase) = self.action_on_index(j);
                acc += phase * rho[(j, i)];
            }
        }
        debug_assert!(acc.im.abs() < 1e-9);
        Ok(acc.re)
    }

    /// Conjugate by X on the flagged qubits. X flips the sign contribution
    /// of Y and Z letters at those positions and leaves I and X alone.
    pub fn conjugate_by_x(&self, flagged: &[bool]) -> Result<Self> {
        if flagged.len() != self.letters.len() {
            return Err(Error::LengthMismatch {
                what: "X-conjugation flags",
                expected: self.letters.len(),
                got: flagged.len(),
            });
        }
        let mut sign = self.sign;
        for (letter, &flag) in self.letters.iter().zip(flagged) {
            if flag && matches!(letter, PauliLetter::Y | PauliLetter::Z) {
                sign = -sign;
            }
        }
        Ok(Self {
            sign,
            letters: self.letters.clone(),
        })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.sign > 0 { '+' } else { '-' })?;
        for l in &self.letters {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (sign, body) = match s.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, s.strip_prefix('+').unwrap_or(s)),
        };
        let letters = body
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(PauliLetter::I),
                'X' => Ok(PauliLetter::X),
                'Y' => Ok(PauliLetter::Y),
                'Z' => Ok(PauliLetter::Z),
                other => Err(Error::InvalidState(format!(
                    "invalid Pauli letter '{other}'"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sign, letters)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The n commuting generators that pin the n-qubit GHZ state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerSet {
    n: usize,
    generators: Vec<PauliString>,
}

impl StabilizerSet {
    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Conjugate every generator by X on the flagged qubits; used when the
    /// resource state itself carries X on negative-weight qubits.
    pub fn conjugate_by_x(&self, flagged: &[bool]) -> Result<Self> {
        let generators = self
            .generators
            .iter()
            .map(|g| g.conjugate_by_x(flagged))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: self.n,
            generators,
        })
    }
}

/// (|0...0> + |1...1>)/sqrt(2) on n qubits.
pub fn ghz_state(n: usize) -> Result<QuantumState> {
    if n == 0 {
        return Err(Error::TooFewNodes { min: 1, got: 0 });
    }
    let dim = 1usize
        .checked_shl(n as u32)
        .ok_or(Error::QubitCapExceeded {
            requested: n,
            cap: crate::tol::QUBIT_CAP_DEFAULT,
        })?;
    let inv_sqrt2 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut amps = vec![C64::default(); dim];
    amps[0] = inv_sqrt2;
    amps[dim - 1] = inv_sqrt2;
    QuantumState::pure_from_slice(&amps)
}

/// GHZ density matrix with its coherence block scaled by `coherence`.
/// coherence = 1 is the pure state, coherence = 0 the fully dephased
/// classical mixture.
pub fn dephased_ghz(n: usize, coherence: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&coherence) {
        return Err(Error::ProbabilityOutOfRange {
            what: "coherence weight",
            value: coherence,
        });
    }
    let pure = ghz_state(n)?;
    let dim = pure.dim();
    let mut rho = pure.density_matrix();
    let scale = C64::new(coherence, 0.0);
    rho[(0, dim - 1)] *= scale;
    rho[(dim - 1, 0)] *= scale;
    QuantumState::mixed(rho)
}

/// Sliding-YY generator set; see the module comment for the pattern.
pub fn stabilizer_generators(n: usize) -> Result<StabilizerSet> {
    if n < 2 {
        return Err(Error::TooFewNodes { min: 2, got: n });
    }
    let mut generators = Vec::with_capacity(n);
    for j in 0..n - 2 {
        let mut letters = vec![PauliLetter::X; n];
        letters[j] = PauliLetter::Y;
        letters[j + 1] = PauliLetter::Y;
        generators.push(PauliString::new(-1, letters)?);
    }
    // Wrap row: the YY pair spans the ends.
    let mut wrap = vec![PauliLetter::X; n];
    wrap[0] = PauliLetter::Y;
    wrap[n - 1] = PauliLetter::Y;
    generators.push(PauliString::new(-1, wrap)?);
    generators.push(PauliString::all_x(n)?);
    Ok(StabilizerSet { n, generators })
}

/// Probability that measuring `k` on the state yields the -1 outcome:
/// (1 - <K>)/2, clamped into [0, 1]. Values below 1e-12 are rounding
/// noise from the expectation sum and snap to an exact 0 so that ideal
/// resources can never fail a test.
pub fn failure_probability(state: &QuantumState, k: &PauliString) -> Result<f64> {
    let expectation = k.expectation(state)?;
    let p = ((1.0 - expectation) / 2.0).clamp(0.0, 1.0);
    Ok(if p < 1e-12 { 0.0 } else { p })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestVerdict {
    Pass,
    Fail,
}

/// One stabilizer test on one copy. The copy is consumed; callers must
/// not reuse the state they passed in.
pub fn run_single_test(
    state: &QuantumState,
    k: &PauliString,
    rng: &mut SimRng,
) -> Result<TestVerdict> {
    let p_fail = failure_probability(state, k)?;
    let draw: f64 = rng.random();
    Ok(if draw < p_fail {
        TestVerdict::Fail
    } else {
        TestVerdict::Pass
    })
}
