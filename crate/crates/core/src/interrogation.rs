//! Quantum interrogation of the database by a dishonest user.
//!
//! The query register is re-encoded into `N` qubits with `|i⟩ → |x_i⟩`
//! (a single 1 at position `i`), one phase oracle call applies
//! `(-1)^{x·A}` and `H^{⊗N}` follows. Measuring `y` and reading it as a
//! guess for `A` scores `matches(y, A)` correct bits.
//!
//! Brute force walks the full `2^N` amplitude vector; the analytic path
//! groups outputs by their number of zeros and only applies to `A = 0`.

use num_bigint::BigUint;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{QpqError, Result};
use crate::numerics::{self, CompensatedSum};
use crate::qstate::StateVector;

pub const DEFAULT_BRUTE_CAP: usize = 14;
pub const BRUTE_CAP_ENV: &str = "QPQLAB_BRUTE_CAP";

/// Brute-force size limit, `QPQLAB_BRUTE_CAP` if set and valid.
pub fn brute_force_cap() -> usize {
    std::env::var(BRUTE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_BRUTE_CAP)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InitialState {
    /// `(|x_j⟩ + Σ_{i≠j} |x_i⟩/√(N-1))/√2`.
    PsiPrime0 { j: usize },
    /// `(|0…0⟩ + |x_j⟩)/√2`.
    QpqState { j: usize },
    /// `|0…0⟩/√2 + Σ_i |x_i⟩/√(2N)`.
    UniformSuperposition,
}

impl InitialState {
    pub fn label(&self) -> &'static str {
        match self {
            InitialState::PsiPrime0 { .. } => "PsiPrime0",
            InitialState::QpqState { .. } => "QPQState",
            InitialState::UniformSuperposition => "UniformSuperposition",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterrogationSpec {
    pub initial: InitialState,
    pub n: usize,
    /// Database string; defaults to all zeros.
    pub table: Vec<bool>,
}

impl InterrogationSpec {
    pub fn new(initial: InitialState, n: usize) -> Result<Self> {
        Self::with_table(initial, vec![false; n])
    }

    pub fn with_table(initial: InitialState, table: Vec<bool>) -> Result<Self> {
        let n = table.len();
        if n < 2 {
            return Err(QpqError::TooFewItems(n));
        }
        match initial {
            InitialState::PsiPrime0 { j } | InitialState::QpqState { j } if j >= n => {
                return Err(QpqError::IndexOutOfRange { index: j, dim: n });
            }
            _ => {}
        }
        Ok(Self { initial, n, table })
    }

    fn is_all_zero(&self) -> bool {
        self.table.iter().all(|b| !b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    BruteForce,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZerosResult {
    /// Expected number of correctly guessed database bits (the expected
    /// number of zeros of `y` when `A = 0`).
    pub expected_zeros: f64,
    pub method: Method,
}

/// Expected score of guessing every bit uniformly at random.
pub fn random_guess_expected_correct(n: usize) -> f64 {
    n as f64 / 2.0
}

/// In-place unnormalized Walsh–Hadamard transform. `data.len()` must be a
/// power of two.
pub fn fwht(data: &mut [Complex64]) {
    let len = data.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in data.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (a, b) = (*x, *y);
                *x = a + b;
                *y = a - b;
            }
        }
        h *= 2;
    }
}

/// `H^{⊗n}|s⟩`.
pub fn walsh_hadamard(s: &StateVector) -> Result<StateVector> {
    if !s.dim().is_power_of_two() {
        return Err(QpqError::DimensionMismatch {
            expected: s.dim().next_power_of_two(),
            found: s.dim(),
        });
    }
    let mut amps = s.amplitudes().to_vec();
    fwht(&mut amps);
    let scale = 1.0 / (s.dim() as f64).sqrt();
    for a in &mut amps {
        *a *= scale;
    }
    StateVector::from_amplitudes(amps)
}

fn initial_state(spec: &InterrogationSpec) -> Result<StateVector> {
    let n = spec.n;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match spec.initial {
        InitialState::PsiPrime0 { j } => {
            let r = h / ((n - 1) as f64).sqrt();
            for i in 0..n {
                amps[1 << i] = Complex64::new(if i == j { h } else { r }, 0.0);
            }
        }
        InitialState::QpqState { j } => {
            amps[0] = Complex64::new(h, 0.0);
            amps[1 << j] = Complex64::new(h, 0.0);
        }
        InitialState::UniformSuperposition => {
            amps[0] = Complex64::new(h, 0.0);
            let r = 1.0 / ((2 * n) as f64).sqrt();
            for i in 0..n {
                amps[1 << i] = Complex64::new(r, 0.0);
            }
        }
    }
    StateVector::from_amplitudes(amps)
}

fn table_mask(table: &[bool]) -> usize {
    table
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0, |m, (i, _)| m | (1 << i))
}

/// The state `H^{⊗N} O_A |init⟩` that the user measures.
pub fn interrogation_output(spec: &InterrogationSpec, cap: usize) -> Result<StateVector> {
    if spec.n > cap {
        return Err(QpqError::BruteForceCap { n: spec.n, cap });
    }
    let mut s = initial_state(spec)?;
    let mask = table_mask(&spec.table);
    for (x, a) in s.amplitudes_mut().iter_mut().enumerate() {
        if (x & mask).count_ones() % 2 == 1 {
            *a = -*a;
        }
    }
    walsh_hadamard(&s)
}

/// Expected correct bits by full state-vector evaluation, capped at
/// [`brute_force_cap`].
pub fn interrogate_bruteforce(spec: &InterrogationSpec) -> Result<ZerosResult> {
    interrogate_bruteforce_with_cap(spec, brute_force_cap())
}

pub fn interrogate_bruteforce_with_cap(
    spec: &InterrogationSpec,
    cap: usize,
) -> Result<ZerosResult> {
    let out = interrogation_output(spec, cap)?;
    let n = spec.n as u32;
    let mask = table_mask(&spec.table);
    let total: CompensatedSum = out
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(y, a)| a.norm_sqr() * (n - (y ^ mask).count_ones()) as f64)
        .collect();
    Ok(ZerosResult {
        expected_zeros: total.value(),
        method: Method::BruteForce,
    })
}

/// Expected zeros from the per-weight coefficients `a_t` (outputs with
/// `y_j = 0` and `t` zeros) and `b_t` (`y_j = 1`), summed with normalized
/// binomial weights so large `N` does not overflow.
pub fn expected_zeros_analytic(spec: &InterrogationSpec) -> Result<ZerosResult> {
    if !spec.is_all_zero() {
        return Err(QpqError::Unsupported(
            "the analytic path assumes an all-zero database".into(),
        ));
    }
    let n = spec.n;
    let nf = n as f64;
    // C(N-1, k)/2^N, i.e. the squared 1/√(2^N) folded into the weight.
    let weights: Vec<f64> = numerics::binomial_half_pmf(n - 1)
        .into_iter()
        .map(|w| 0.5 * w)
        .collect();
    let s2 = std::f64::consts::SQRT_2;
    let m = nf - 1.0;
    // (a_t, b_t) for an output with t zeros.
    let coefficients = |t: f64| -> (f64, f64) {
        match spec.initial {
            InitialState::PsiPrime0 { .. } => (
                1.0 / s2 - (nf + 1.0) / (2.0 * m).sqrt() + s2 * t / m.sqrt(),
                -1.0 / s2 - m.sqrt() / s2 + s2 * t / m.sqrt(),
            ),
            _ => (s2, 0.0),
        }
    };
    if spec.initial == InitialState::UniformSuperposition {
        return Err(QpqError::Unsupported(
            "no analytic coefficients for the uniform superposition".into(),
        ));
    }
    let mut acc = CompensatedSum::new();
    for (t, w) in (1..=n).zip(&weights) {
        let tf = t as f64;
        acc.add(tf * w * coefficients(tf).0.powi(2));
    }
    for (t, w) in (1..n).zip(&weights[1..]) {
        let tf = t as f64;
        acc.add(tf * w * coefficients(tf).1.powi(2));
    }
    Ok(ZerosResult {
        expected_zeros: acc.value(),
        method: Method::Analytic,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub label: &'static str,
    #[serde(serialize_with = "ser_big")]
    pub lhs: BigUint,
    #[serde(serialize_with = "ser_big")]
    pub rhs: BigUint,
    pub holds: bool,
}

fn ser_big<S: serde::Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinomialReport {
    pub n: usize,
    pub checks: Vec<IdentityCheck>,
}

impl BinomialReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Checks the six power sums `Σ t^p C(N-1, t-1)` and `Σ t^p C(N-1, t)`,
/// `p = 1, 2, 3`, against their closed forms in exact integer arithmetic.
pub fn verify_binomial_identities(n: usize) -> Result<BinomialReport> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    let m = n - 1;
    let mut row = vec![BigUint::from(1u32)];
    for k in 0..m {
        let next = &row[k] * BigUint::from(m - k) / BigUint::from(k + 1);
        row.push(next);
    }
    let power_sum = |p: u32, shifted: bool| -> BigUint {
        row.iter()
            .enumerate()
            .map(|(k, c)| {
                let t = if shifted { k + 1 } else { k };
                c * BigUint::from(t).pow(p)
            })
            .sum()
    };
    let nb = BigUint::from(n);
    let one = BigUint::from(1u32);
    let two = BigUint::from(2u32);
    let big = |x: usize| BigUint::from(x);
    // (label, lhs, coefficient, exponent offset d in 2^{N-d})
    let cases: [(&'static str, BigUint, BigUint, usize); 6] = [
        (
            "sum t*C(N-1,t-1) = (N+1)2^(N-2)",
            power_sum(1, true),
            &nb + &one,
            2,
        ),
        (
            "sum t*C(N-1,t) = (N-1)2^(N-2)",
            power_sum(1, false),
            big(m),
            2,
        ),
        (
            "sum t^2*C(N-1,t-1) = N(N+3)2^(N-3)",
            power_sum(2, true),
            &nb * big(n + 3),
            3,
        ),
        (
            "sum t^2*C(N-1,t) = N(N-1)2^(N-3)",
            power_sum(2, false),
            &nb * big(m),
            3,
        ),
        (
            "sum t^3*C(N-1,t-1) = (N+1)(N^2+5N-2)2^(N-4)",
            power_sum(3, true),
            big(n + 1) * (&nb * &nb + big(5 * n) - &two),
            4,
        ),
        (
            "sum t^3*C(N-1,t) = (N-1)^2(N+2)2^(N-4)",
            power_sum(3, false),
            big(m) * big(m) * big(n + 2),
            4,
        ),
    ];
    let checks = cases
        .into_iter()
        .map(|(label, lhs, coef, d)| {
            // Compare 16·lhs with coef·2^{N+4-d} to stay in the integers for N < 4.
            let scaled_rhs = &coef << (n + 4 - d);
            let holds = (&lhs << 4usize) == scaled_rhs;
            IdentityCheck {
                label,
                lhs,
                rhs: scaled_rhs >> 4usize,
                holds,
            }
        })
        .collect();
    Ok(BinomialReport { n, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fwht_round_trip() {
        let amps: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new(i as f64 * 0.1 - 0.3, (i % 3) as f64 * 0.2))
            .collect();
        let s = StateVector::from_amplitudes(amps)
            .unwrap()
            .normalized()
            .unwrap();
        let back = walsh_hadamard(&walsh_hadamard(&s).unwrap()).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn walsh_hadamard_rejects_odd_dims() {
        assert!(walsh_hadamard(&StateVector::uniform(3).unwrap()).is_err());
    }

    #[test]
    fn n2_psi_prime_matches_analytic() {
        let spec = InterrogationSpec::new(InitialState::PsiPrime0 { j: 0 }, 2).unwrap();
        let bf = interrogate_bruteforce_with_cap(&spec, 14).unwrap();
        let an = expected_zeros_analytic(&spec).unwrap();
        assert!((bf.expected_zeros - 1.0).abs() < 1e-12);
        assert!((an.expected_zeros - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let spec = InterrogationSpec::new(InitialState::UniformSuperposition, 6).unwrap();
        assert_eq!(
            interrogate_bruteforce_with_cap(&spec, 5),
            Err(QpqError::BruteForceCap { n: 6, cap: 5 })
        );
    }

    #[test]
    fn analytic_rejects_unsupported() {
        let u = InterrogationSpec::new(InitialState::UniformSuperposition, 4).unwrap();
        assert!(expected_zeros_analytic(&u).is_err());
        let nonzero = InterrogationSpec::with_table(
            InitialState::PsiPrime0 { j: 1 },
            vec![true, false, false],
        )
        .unwrap();
        assert!(expected_zeros_analytic(&nonzero).is_err());
    }

    #[test]
    fn identity_n4_first_sum() {
        let r = verify_binomial_identities(4).unwrap();
        assert_eq!(r.checks[0].lhs, BigUint::from(20u32));
        assert!(r.all_hold());
    }

    #[test]
    fn identities_tiny_n() {
        assert!(verify_binomial_identities(2).unwrap().all_hold());
        assert!(verify_binomial_identities(3).unwrap().all_hold());
    }

    #[test]
    fn spec_validation() {
        assert!(InterrogationSpec::new(InitialState::QpqState { j: 5 }, 5).is_err());
        assert!(InterrogationSpec::new(InitialState::UniformSuperposition, 1).is_err());
    }
}
