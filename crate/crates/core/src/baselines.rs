//! Reduced models of two earlier O(log N) private query schemes, used for
//! side-by-side comparison under the same computational-basis attack.
//!
//! * QPQ: the user sends `|j⟩` and `(|j⟩ + |0⟩)/√2` one after the other
//!   through the answer oracle and checks the superposed reply against the
//!   known standard answer `A_0`.
//! * Phase-encoded: a single `(|j⟩ + |0⟩)/√2` picks up `(-1)^{A_i}` phases
//!   and the user reads `A_j ⊕ A_0` from the relative sign.
//!
//! Both require `j ≠ 0`, index 0 being the standard query.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::adversary::{self, Concealment};
use crate::error::{QpqError, Result};
use crate::protocol::{
    self, register_index, DatabaseTable, Direction, QuerySpec, Register, Transmission,
};
use crate::qstate::{self, Outcome, StateVector};

/// Known answer to the standard query 0.
pub const STANDARD_ANSWER: bool = false;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BaselineKind {
    Qpq,
    PhaseEncoded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BaselineAttackReport {
    pub identified_j: bool,
    pub detected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpqHonestResult {
    pub answer: bool,
    pub verified: bool,
    pub transmissions: Vec<Transmission>,
}

impl QpqHonestResult {
    /// Request/response pairs; the user waits for each reply before sending
    /// the next state.
    pub fn round_trips(&self) -> usize {
        self.transmissions
            .iter()
            .filter(|t| t.direction == Direction::UserToDatabase)
            .count()
    }
}

fn check_query(table: &DatabaseTable, j: usize) -> Result<()> {
    if j == 0 {
        return Err(QpqError::InvalidQuery(
            "index 0 is the standard query and cannot be asked".into(),
        ));
    }
    if j >= table.len() {
        return Err(QpqError::InvalidQuery(format!(
            "query {j} out of range for N = {}",
            table.len()
        )));
    }
    Ok(())
}

fn pair_state(n: usize, j: usize, sign_j: f64) -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex64::new(0.0, 0.0); n];
    amps[0] = Complex64::new(h, 0.0);
    amps[j] = Complex64::new(sign_j * h, 0.0);
    StateVector::from_amplitudes(amps).expect("n >= 2")
}

/// The superposed reply an honest QPQ database produces when `A_j = a_j`.
fn qpq_expected_reply(n: usize, j: usize, a_j: bool) -> StateVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut amps = vec![Complex64::new(0.0, 0.0); 2 * n];
    amps[register_index(j, a_j)] = Complex64::new(h, 0.0);
    amps[register_index(0, STANDARD_ANSWER)] = Complex64::new(h, 0.0);
    StateVector::from_amplitudes(amps).expect("n >= 2")
}

fn read_answer_bit<R: Rng + ?Sized>(reply: &StateVector, rng: &mut R) -> Result<(usize, bool)> {
    match qstate::measure_computational(reply, rng)?.outcome {
        Outcome::Index(idx) => Ok((idx / 2, idx % 2 == 1)),
        Outcome::Other => unreachable!(),
    }
}

fn qpq_transmissions(n: usize) -> Vec<Transmission> {
    let q = protocol::query_qubits(n);
    let mut out = Vec::new();
    for round in 1..=2 {
        out.push(Transmission {
            round,
            direction: Direction::UserToDatabase,
            register: Register::Query,
            qubits: q,
        });
        out.push(Transmission {
            round,
            direction: Direction::DatabaseToUser,
            register: Register::Query,
            qubits: q,
        });
        out.push(Transmission {
            round,
            direction: Direction::DatabaseToUser,
            register: Register::Answer,
            qubits: 1,
        });
    }
    out
}

/// Honest QPQ query.
pub fn qpq_honest<R: Rng + ?Sized>(
    table: &DatabaseTable,
    j: usize,
    rng: &mut R,
) -> Result<QpqHonestResult> {
    check_query(table, j)?;
    let n = table.len();
    let plain = protocol::with_answer_register(&StateVector::basis(n, j)?);
    let superposed = protocol::with_answer_register(&pair_state(n, j, 1.0));
    // The order is random but both replies are processed the same way.
    let superposed_first = rng.gen::<bool>();
    let (first, second) = if superposed_first {
        (&superposed, &plain)
    } else {
        (&plain, &superposed)
    };
    let first = protocol::oracle_retrieve(first, table)?;
    let second = protocol::oracle_retrieve(second, table)?;
    let (plain_reply, sup_reply) = if superposed_first {
        (second, first)
    } else {
        (first, second)
    };
    let (_, answer) = read_answer_bit(&plain_reply, rng)?;
    let check = qstate::discriminate(&sup_reply, &[qpq_expected_reply(n, j, answer)], rng)?;
    Ok(QpqHonestResult {
        answer,
        verified: check.outcome == Outcome::Index(0),
        transmissions: qpq_transmissions(n),
    })
}

/// The database measures both incoming query registers in the computational
/// basis before answering.
pub fn qpq_attack<R: Rng + ?Sized>(
    table: &DatabaseTable,
    j: usize,
    rng: &mut R,
) -> Result<BaselineAttackReport> {
    check_query(table, j)?;
    let n = table.len();
    let plain = StateVector::basis(n, j)?;
    let superposed = pair_state(n, j, 1.0);
    let mut seen = Vec::with_capacity(2);
    let mut replies = Vec::with_capacity(2);
    for s in [&plain, &superposed] {
        let m = qstate::measure_computational(s, rng)?;
        let Outcome::Index(c) = m.outcome else {
            unreachable!()
        };
        seen.push(c);
        replies.push(protocol::oracle_retrieve(
            &protocol::with_answer_register(&m.collapsed),
            table,
        )?);
    }
    let guess = seen.iter().copied().find(|&c| c != 0);
    let (_, answer) = read_answer_bit(&replies[0], rng)?;
    let check = qstate::discriminate(&replies[1], &[qpq_expected_reply(n, j, answer)], rng)?;
    Ok(BaselineAttackReport {
        identified_j: guess == Some(j),
        detected: check.outcome != Outcome::Index(0),
    })
}

/// Exact probability that the QPQ check flags the measuring database,
/// averaged over the collapse of the superposed state.
pub fn qpq_attack_detection_probability(table: &DatabaseTable, j: usize) -> Result<f64> {
    check_query(table, j)?;
    let n = table.len();
    let expected = qpq_expected_reply(n, j, table.bit(j));
    let mut p = 0.0;
    for c in [0, j] {
        let reply = protocol::oracle_retrieve(
            &protocol::with_answer_register(&StateVector::basis(n, c)?),
            table,
        )?;
        p += 0.5 * qstate::probabilities(&reply, std::slice::from_ref(&expected))?.other;
    }
    Ok(p)
}

fn phase_oracle(s: &StateVector, table: &DatabaseTable) -> Result<StateVector> {
    if s.dim() != table.len() {
        return Err(QpqError::DimensionMismatch {
            expected: table.len(),
            found: s.dim(),
        });
    }
    let amps = s
        .amplitudes()
        .iter()
        .zip(table.bits())
        .map(|(&a, &bit)| if bit { -a } else { a })
        .collect();
    StateVector::from_amplitudes(amps)
}

fn phase_basis(n: usize, j: usize) -> [StateVector; 2] {
    [pair_state(n, j, 1.0), pair_state(n, j, -1.0)]
}

/// Honest phase-encoded query; `a0` is the user's known standard answer.
pub fn phase_encoded_honest(table: &DatabaseTable, j: usize, a0: bool) -> Result<bool> {
    check_query(table, j)?;
    let n = table.len();
    let reply = phase_oracle(&pair_state(n, j, 1.0), table)?;
    let probs = qstate::probabilities(&reply, &phase_basis(n, j))?;
    let parity = probs.per_vector[1] > probs.per_vector[0];
    Ok(parity ^ a0)
}

/// Outcome of the phase-encoded attack together with the user's (random)
/// extracted answer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PhaseAttackOutcome {
    pub report: BaselineAttackReport,
    pub user_answer: Option<bool>,
}

/// The database measures `(|j⟩ + |0⟩)/√2` and returns the outcome state.
pub fn phase_encoded_attack<R: Rng + ?Sized>(
    table: &DatabaseTable,
    j: usize,
    rng: &mut R,
) -> Result<PhaseAttackOutcome> {
    check_query(table, j)?;
    let n = table.len();
    let m = qstate::measure_computational(&pair_state(n, j, 1.0), rng)?;
    let Outcome::Index(c) = m.outcome else {
        unreachable!()
    };
    let reply = phase_oracle(&m.collapsed, table)?;
    let decoded = qstate::discriminate(&reply, &phase_basis(n, j), rng)?;
    let user_answer = match decoded.outcome {
        Outcome::Index(k) => Some((k == 1) ^ STANDARD_ANSWER),
        Outcome::Other => None,
    };
    Ok(PhaseAttackOutcome {
        report: BaselineAttackReport {
            identified_j: c == j,
            detected: decoded.outcome == Outcome::Other,
        },
        user_answer,
    })
}

/// Exact detection probability of the phase-encoded attack.
pub fn phase_encoded_attack_detection_probability(table: &DatabaseTable, j: usize) -> Result<f64> {
    check_query(table, j)?;
    let n = table.len();
    let basis = phase_basis(n, j);
    let mut p = 0.0;
    for c in [0, j] {
        let reply = phase_oracle(&StateVector::basis(n, c)?, table)?;
        p += 0.5 * qstate::probabilities(&reply, &basis)?.other;
    }
    Ok(p)
}

/// One row of the protocol comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub protocol: String,
    /// Answer-carrying transmissions from the database per query, an upper
    /// bound on what a dishonest user learns deterministically.
    pub deterministic_data_bits: usize,
    pub cheat_sensitive: bool,
    pub identified_j_rate: f64,
    pub detection_rate: f64,
    /// Exact mutual information between `j` and the attacker's view.
    pub leakage_bits: f64,
}

fn random_nonstandard_query<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    rng.gen_range(1..n)
}

fn table_with_standard<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DatabaseTable> {
    let mut bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
    bits[0] = STANDARD_ANSWER;
    DatabaseTable::new(bits)
}

/// Runs the computational-basis attack `trials` times against each scheme:
/// QPQ, phase-encoded, the basic protocol with uniform concealment and the
/// randomized protocol at the integer optimum of `t` with an `α`-uniform
/// concealing fake.
pub fn comparison_table<R: Rng + ?Sized>(
    n: usize,
    trials: u64,
    rng: &mut R,
) -> Result<Vec<ComparisonRow>> {
    if n < 3 {
        return Err(QpqError::TooFewItems(n));
    }
    if trials == 0 {
        return Err(QpqError::Config {
            field: "trials",
            reason: "must be at least 1".into(),
        });
    }
    let rate = |hits: u64| hits as f64 / trials as f64;
    let log_choices = ((n - 1) as f64).log2();
    let ours_leak = adversary::query_leakage_bits(n, true)?;
    let ours_answer_bits = {
        let q = QuerySpec::basic(n, 1)?;
        let (_, tr) = protocol::run_honest(&DatabaseTable::zeros(n)?, &q, rng)?;
        tr.transmissions
            .iter()
            .filter(|t| t.direction == Direction::DatabaseToUser && t.register == Register::Answer)
            .count()
    };
    let qpq_answer_bits = qpq_transmissions(n)
        .iter()
        .filter(|t| t.direction == Direction::DatabaseToUser && t.register == Register::Answer)
        .count();

    let mut rows = Vec::with_capacity(4);

    let (mut ident, mut det) = (0, 0);
    for _ in 0..trials {
        let table = table_with_standard(n, rng)?;
        let j = random_nonstandard_query(n, rng);
        let r = qpq_attack(&table, j, rng)?;
        ident += r.identified_j as u64;
        det += r.detected as u64;
    }
    rows.push(ComparisonRow {
        protocol: "QPQ".into(),
        deterministic_data_bits: qpq_answer_bits,
        cheat_sensitive: det > 0,
        identified_j_rate: rate(ident),
        detection_rate: rate(det),
        leakage_bits: log_choices,
    });

    let (mut ident, mut det) = (0, 0);
    for _ in 0..trials {
        let table = table_with_standard(n, rng)?;
        let j = random_nonstandard_query(n, rng);
        let r = phase_encoded_attack(&table, j, rng)?.report;
        ident += r.identified_j as u64;
        det += r.detected as u64;
    }
    rows.push(ComparisonRow {
        protocol: "PhaseEncoded".into(),
        deterministic_data_bits: 1,
        cheat_sensitive: det > 0,
        identified_j_rate: rate(ident),
        detection_rate: rate(det),
        leakage_bits: 0.5 * log_choices,
    });

    let t_star = adversary::optimal_t_integer(n)?;
    for (label, randomized) in [("Ours-basic", false), ("Ours-randomized", true)] {
        let (mut ident, mut det) = (0, 0);
        for _ in 0..trials {
            let table = DatabaseTable::random(n, rng)?;
            let j = rng.gen_range(0..n);
            let (q, policy) = if randomized {
                (
                    QuerySpec::random_with_size(n, j, t_star, rng)?,
                    Concealment::RandomAlpha,
                )
            } else {
                (QuerySpec::basic(n, j)?, Concealment::Uniform)
            };
            let r = adversary::full_attack(&table, &q, policy, rng)?;
            ident += (r.confirmed_j == Some(true)) as u64;
            det += r.detected as u64;
        }
        let protocol = if randomized {
            format!("{label}(t={t_star})")
        } else {
            label.to_string()
        };
        rows.push(ComparisonRow {
            protocol,
            deterministic_data_bits: ours_answer_bits,
            cheat_sensitive: det > 0,
            identified_j_rate: rate(ident),
            detection_rate: rate(det),
            leakage_bits: ours_leak,
        });
    }
    Ok(rows)
}
