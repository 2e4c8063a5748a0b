//! The honest two-round query protocol.
//!
//! The user superposes the true index `j` (weight 1/√2) with a set `T` of
//! rhetoric indices (weight 1/√(2t) each). The database runs its retrieval
//! oracle `|i⟩|b⟩ → |i⟩|b ⊕ A_i⟩`, the user flips the sign of `|j⟩|1⟩`, the
//! database uncomputes the answer register and the user reads `A_j` off the
//! relative sign of `|j⟩` by discriminating the two expected final states.
//!
//! Composite query ⊗ answer registers are laid out as `2·i + b`.

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{QpqError, Result};
use crate::qstate::{self, DiscriminationProbabilities, Outcome, StateVector};

/// Weight on the answer-register `|1⟩` branch tolerated before uncomputation
/// is considered to have failed.
const ANSWER_CLEAR_EPS: f64 = 1e-12;

/// Index of `|query⟩|bit⟩` in a query ⊗ answer register.
pub fn register_index(query: usize, bit: bool) -> usize {
    query * 2 + bit as usize
}

/// `⌈log₂ n⌉`, the width of the query register in qubits.
pub fn query_qubits(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// The database contents `A_0 … A_{N-1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatabaseTable {
    bits: Vec<bool>,
}

impl DatabaseTable {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.len() < 2 {
            return Err(QpqError::TooFewItems(bits.len()));
        }
        Ok(Self { bits })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![false; n])
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        Self::new((0..n).map(|_| rng.gen()).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QueryMode {
    /// Every index other than `j` is a rhetoric query.
    Basic,
    /// The user picks the rhetoric set.
    Randomized,
}

/// A true query `j` together with its rhetoric set `T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuerySpec {
    n: usize,
    j: usize,
    rhetoric: Vec<usize>,
    mode: QueryMode,
}

impl QuerySpec {
    pub fn basic(n: usize, j: usize) -> Result<Self> {
        check_n_j(n, j)?;
        Ok(Self {
            n,
            j,
            rhetoric: (0..n).filter(|&i| i != j).collect(),
            mode: QueryMode::Basic,
        })
    }

    pub fn randomized<I>(n: usize, j: usize, rhetoric: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        check_n_j(n, j)?;
        let mut set: Vec<usize> = rhetoric.into_iter().collect();
        set.sort_unstable();
        set.dedup();
        if set.is_empty() {
            return Err(QpqError::InvalidQuery("rhetoric set is empty".into()));
        }
        if set.binary_search(&j).is_ok() {
            return Err(QpqError::InvalidQuery(format!(
                "true query {j} appears in the rhetoric set"
            )));
        }
        if let Some(&bad) = set.iter().find(|&&i| i >= n) {
            return Err(QpqError::InvalidQuery(format!(
                "rhetoric index {bad} out of range for N = {n}"
            )));
        }
        Ok(Self {
            n,
            j,
            rhetoric: set,
            mode: QueryMode::Randomized,
        })
    }

    /// Rhetoric set drawn uniformly from the `2^{N-1} - 1` nonempty subsets
    /// of `[N] \ {j}`.
    pub fn random_subset<R: Rng + ?Sized>(n: usize, j: usize, rng: &mut R) -> Result<Self> {
        check_n_j(n, j)?;
        loop {
            let set: Vec<usize> = (0..n).filter(|&i| i != j && rng.gen::<bool>()).collect();
            if !set.is_empty() {
                return Self::randomized(n, j, set);
            }
        }
    }

    /// Rhetoric set drawn uniformly from the subsets of size `t`.
    pub fn random_with_size<R: Rng + ?Sized>(
        n: usize,
        j: usize,
        t: usize,
        rng: &mut R,
    ) -> Result<Self> {
        check_n_j(n, j)?;
        if t == 0 || t > n - 1 {
            return Err(QpqError::RhetoricCountOutOfRange { t, max: n - 1 });
        }
        let picks = index::sample(rng, n - 1, t);
        Self::randomized(n, j, picks.iter().map(|i| if i >= j { i + 1 } else { i }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> usize {
        self.j
    }

    /// Sorted rhetoric indices.
    pub fn rhetoric(&self) -> &[usize] {
        &self.rhetoric
    }

    pub fn t(&self) -> usize {
        self.rhetoric.len()
    }

    pub fn mode(&self) -> QueryMode {
        self.mode
    }

    pub fn is_rhetoric(&self, i: usize) -> bool {
        self.rhetoric.binary_search(&i).is_ok()
    }
}

fn check_n_j(n: usize, j: usize) -> Result<()> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    if j >= n {
        return Err(QpqError::InvalidQuery(format!(
            "true query {j} out of range for N = {n}"
        )));
    }
    Ok(())
}

/// `(|j⟩ + Σ_{i∈T} |i⟩/√t)/√2` on the N-dimensional query register.
pub fn prepare_initial(q: &QuerySpec) -> StateVector {
    signed_final(q, 1.0)
}

fn signed_final(q: &QuerySpec, sign_j: f64) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); q.n];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = h / (q.t() as f64).sqrt();
    amps[q.j] = Complex64::new(sign_j * h, 0.0);
    for &i in &q.rhetoric {
        amps[i] = Complex64::new(r, 0.0);
    }
    StateVector::from_amplitudes(amps).expect("n >= 2")
}

/// The pair `(|ψ₃⁺⟩, |ψ₃⁻⟩)`: the honest final query-register states for
/// `A_j = 0` and `A_j = 1`.
pub fn expected_finals(q: &QuerySpec) -> (StateVector, StateVector) {
    (signed_final(q, 1.0), signed_final(q, -1.0))
}

/// `|s⟩ ⊗ |0⟩`.
pub fn with_answer_register(s: &StateVector) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 2 * s.dim()];
    for (i, &a) in s.amplitudes().iter().enumerate() {
        amps[register_index(i, false)] = a;
    }
    StateVector::from_amplitudes(amps).expect("nonempty")
}

/// Splits off an answer register that must be exactly `|0⟩`.
pub fn query_register(s: &StateVector) -> Result<StateVector> {
    if !s.dim().is_multiple_of(2) {
        return Err(QpqError::DimensionMismatch {
            expected: s.dim() + 1,
            found: s.dim(),
        });
    }
    let amps = s.amplitudes();
    let stray: f64 = amps.iter().skip(1).step_by(2).map(|a| a.norm_sqr()).sum();
    if stray > ANSWER_CLEAR_EPS {
        return Err(QpqError::AnswerRegisterNotClear(stray));
    }
    StateVector::from_amplitudes(amps.iter().step_by(2).copied().collect())
}

fn check_composite(s: &StateVector, n: usize) -> Result<()> {
    if s.dim() != 2 * n {
        return Err(QpqError::DimensionMismatch {
            expected: 2 * n,
            found: s.dim(),
        });
    }
    Ok(())
}

/// Data-retrieving oracle `|i⟩|b⟩ → |i⟩|b ⊕ A_i⟩`. Self-inverse.
pub fn oracle_retrieve(s: &StateVector, table: &DatabaseTable) -> Result<StateVector> {
    check_composite(s, table.len())?;
    let mut out = s.clone();
    let amps = out.amplitudes_mut();
    for (i, &bit) in table.bits().iter().enumerate() {
        if bit {
            amps.swap(register_index(i, false), register_index(i, true));
        }
    }
    Ok(out)
}

/// The user's controlled-⊕ into an ancilla prepared in `(|0⟩ - |1⟩)/√2`.
///
/// The ancilla is an eigenvector of the flip, so the gate reduces to a sign
/// change on `|j⟩|1⟩` and the ancilla itself is not carried.
pub fn controlled_xor(s: &StateVector, j: usize) -> Result<StateVector> {
    if !s.dim().is_multiple_of(2) {
        return Err(QpqError::DimensionMismatch {
            expected: s.dim() + 1,
            found: s.dim(),
        });
    }
    let n = s.dim() / 2;
    if j >= n {
        return Err(QpqError::IndexOutOfRange { index: j, dim: n });
    }
    let mut out = s.clone();
    let idx = register_index(j, true);
    out.amplitudes_mut()[idx] = -out.amplitudes_mut()[idx];
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    UserToDatabase,
    DatabaseToUser,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Register {
    Query,
    Answer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Transmission {
    pub round: u8,
    pub direction: Direction,
    pub register: Register,
    pub qubits: usize,
}

/// Communication log of one honest run together with the four protocol
/// states `|ψ₀⟩⊗|0⟩, |Ψ₁⟩, |Ψ₂⟩, |Ψ₃⟩`.
#[derive(Clone, Debug)]
pub struct Transcript {
    pub transmissions: Vec<Transmission>,
    pub initial: StateVector,
    pub retrieved: StateVector,
    pub phased: StateVector,
    pub uncomputed: StateVector,
}

impl Transcript {
    fn honest_transmissions(n: usize) -> Vec<Transmission> {
        use Direction::*;
        use Register::*;
        let q = query_qubits(n);
        let tx = |round, direction, register, qubits| Transmission {
            round,
            direction,
            register,
            qubits,
        };
        vec![
            tx(1, UserToDatabase, Query, q),
            tx(1, DatabaseToUser, Query, q),
            tx(1, DatabaseToUser, Answer, 1),
            tx(2, UserToDatabase, Query, q),
            tx(2, UserToDatabase, Answer, 1),
            tx(2, DatabaseToUser, Query, q),
        ]
    }

    pub fn total_qubits(&self) -> usize {
        self.transmissions.iter().map(|t| t.qubits).sum()
    }

    pub fn count(&self, register: Register) -> usize {
        self.transmissions
            .iter()
            .filter(|t| t.register == register)
            .count()
    }

    pub fn rounds(&self) -> u8 {
        self.transmissions
            .iter()
            .map(|t| t.round)
            .max()
            .unwrap_or(0)
    }
}

/// What the user concludes from the final discrimination. `answer` is `None`
/// when the cheat flag fires.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AnswerResult {
    pub answer: Option<bool>,
    pub detected_cheat: bool,
}

/// Exact outcome probabilities of the user's final measurement on a
/// query-register state `[p(ψ₃⁺), p(ψ₃⁻)]` and `other`.
pub fn decode_probabilities(
    state: &StateVector,
    q: &QuerySpec,
) -> Result<DiscriminationProbabilities> {
    let (plus, minus) = expected_finals(q);
    qstate::probabilities(state, &[plus, minus])
}

/// The user's final discriminating measurement.
pub fn decode<R: Rng + ?Sized>(
    state: &StateVector,
    q: &QuerySpec,
    rng: &mut R,
) -> Result<AnswerResult> {
    let (plus, minus) = expected_finals(q);
    let m = qstate::discriminate(state, &[plus, minus], rng)?;
    Ok(match m.outcome {
        Outcome::Index(0) => AnswerResult {
            answer: Some(false),
            detected_cheat: false,
        },
        Outcome::Index(_) => AnswerResult {
            answer: Some(true),
            detected_cheat: false,
        },
        Outcome::Other => AnswerResult {
            answer: None,
            detected_cheat: true,
        },
    })
}

/// Honest end-to-end execution.
pub fn run_honest<R: Rng + ?Sized>(
    table: &DatabaseTable,
    q: &QuerySpec,
    rng: &mut R,
) -> Result<(AnswerResult, Transcript)> {
    if table.len() != q.n() {
        return Err(QpqError::DimensionMismatch {
            expected: q.n(),
            found: table.len(),
        });
    }
    let initial = with_answer_register(&prepare_initial(q));
    let retrieved = oracle_retrieve(&initial, table)?;
    let phased = controlled_xor(&retrieved, q.j())?;
    let uncomputed = oracle_retrieve(&phased, table)?;
    let final_query = query_register(&uncomputed)?;
    let result = decode(&final_query, q, rng)?;
    Ok((
        result,
        Transcript {
            transmissions: Transcript::honest_transmissions(q.n()),
            initial,
            retrieved,
            phased,
            uncomputed,
        },
    ))
}
