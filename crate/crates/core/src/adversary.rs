//! Dishonest-database strategies and the closed-form quantities that
//! describe them.
//!
//! The attack modelled throughout is the cheap one: measure the incoming
//! query register in the computational basis, use the second round to learn
//! whether the outcome `k` was the true query, then hand the user some fake
//! final state and hope the discrimination does not flag it.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{QpqError, Result};
use crate::numerics::{self, CompensatedSum};
use crate::protocol::{self, register_index, DatabaseTable, QuerySpec};
use crate::qstate::{self, Outcome, StateVector, EPS_NORM};

/// A state the database returns in place of the honest one.
#[derive(Clone, Debug, PartialEq)]
pub enum FakeState {
    /// `Σ_i |i⟩/√N`.
    Uniform,
    /// The measurement outcome `|k⟩`.
    OutcomeState(usize),
    /// `(|k⟩|1⟩ + |l⟩|0⟩)/√2` on the query ⊗ answer register.
    ConfirmationProbe { k: usize, l: usize },
    /// `a|k⟩ + b Σ_{i≠k} |i⟩` with `a² + (N-1)b² = 1`.
    ParamFake { a: f64, b: f64, k: usize },
    /// Arbitrary normalized amplitudes on the query register.
    GeneralFake(Vec<Complex64>),
}

impl FakeState {
    /// `ParamFake` with `a = cos α`, `b = sin α / √(N-1)`.
    pub fn from_angle(n: usize, alpha: f64, k: usize) -> Self {
        FakeState::ParamFake {
            a: alpha.cos(),
            b: alpha.sin() / ((n - 1) as f64).sqrt(),
            k,
        }
    }

    /// Builds the state for an `n`-item database.
    pub fn to_state(&self, n: usize) -> Result<StateVector> {
        if n < 2 {
            return Err(QpqError::TooFewItems(n));
        }
        let check_index = |i: usize, dim: usize| {
            if i >= dim {
                Err(QpqError::IndexOutOfRange { index: i, dim })
            } else {
                Ok(())
            }
        };
        match self {
            FakeState::Uniform => StateVector::uniform(n),
            FakeState::OutcomeState(k) => StateVector::basis(n, *k),
            FakeState::ConfirmationProbe { k, l } => {
                check_index(*k, n)?;
                check_index(*l, n)?;
                if k == l {
                    return Err(QpqError::InvalidFake("probe requires k ≠ l".into()));
                }
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let mut amps = vec![Complex64::new(0.0, 0.0); 2 * n];
                amps[register_index(*k, true)] = Complex64::new(h, 0.0);
                amps[register_index(*l, false)] = Complex64::new(h, 0.0);
                StateVector::from_amplitudes(amps)
            }
            FakeState::ParamFake { a, b, k } => {
                check_index(*k, n)?;
                let norm = a * a + (n - 1) as f64 * b * b;
                if (norm - 1.0).abs() > EPS_NORM {
                    return Err(QpqError::InvalidFake(format!(
                        "a² + (N-1)b² = {norm}, expected 1"
                    )));
                }
                let mut amps = vec![Complex64::new(*b, 0.0); n];
                amps[*k] = Complex64::new(*a, 0.0);
                StateVector::from_amplitudes(amps)
            }
            FakeState::GeneralFake(alpha) => {
                if alpha.len() != n {
                    return Err(QpqError::DimensionMismatch {
                        expected: n,
                        found: alpha.len(),
                    });
                }
                let s = StateVector::from_amplitudes(alpha.clone())?;
                if !s.is_normalized() {
                    return Err(QpqError::InvalidFake(format!(
                        "amplitudes have norm² {}",
                        s.norm_sqr()
                    )));
                }
                Ok(s)
            }
        }
    }
}

/// Probability that the user's final measurement flags `fake`:
/// `1 - |⟨φ|ψ₃⁺⟩|² - |⟨φ|ψ₃⁻⟩|²`, from amplitudes.
pub fn detection_probability(fake: &FakeState, q: &QuerySpec) -> Result<f64> {
    if matches!(fake, FakeState::ConfirmationProbe { .. }) {
        return Err(QpqError::InvalidFake(
            "a confirmation probe is a round-one state, not a final one".into(),
        ));
    }
    let phi = fake.to_state(q.n())?;
    Ok(protocol::decode_probabilities(&phi, q)?.other)
}

/// Closed form of the detection probability of `ParamFake(a, b, k)` for any
/// query whose rhetoric set has size `t` and contains `k`:
/// `1 - 2ab + b² - b²t - (a² + b² - 2ab)/t`.
pub fn detection_prob_param(t: usize, a: f64, b: f64) -> Result<f64> {
    if t == 0 {
        return Err(QpqError::RhetoricCountOutOfRange { t, max: usize::MAX });
    }
    let t = t as f64;
    Ok(1.0 - 2.0 * a * b + b * b - b * b * t - (a * a + b * b - 2.0 * a * b) / t)
}

/// One dishonest-database run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AttackReport {
    pub measured_k: usize,
    /// Whether the probe said `k = j`; `None` when no probe was sent.
    pub confirmed_j: Option<bool>,
    pub detected: bool,
    pub user_answer: Option<bool>,
}

/// Measure, probe, and learn whether `k = j`.
///
/// The user's honest controlled-⊕ flips the sign of `|k⟩|1⟩` exactly when
/// `k = j`, so the two possible replies are orthogonal and the database's
/// discrimination never errs.
pub fn confirmation_attack<R: Rng + ?Sized>(
    table: &DatabaseTable,
    q: &QuerySpec,
    rng: &mut R,
) -> Result<AttackReport> {
    if table.len() != q.n() {
        return Err(QpqError::DimensionMismatch {
            expected: q.n(),
            found: table.len(),
        });
    }
    let n = q.n();
    let received = protocol::prepare_initial(q);
    let k = match qstate::measure_computational(&received, rng)?.outcome {
        Outcome::Index(k) => k,
        Outcome::Other => unreachable!("computational measurement has no complement"),
    };
    let l = {
        let r = rng.gen_range(0..n - 1);
        if r >= k {
            r + 1
        } else {
            r
        }
    };
    let probe = FakeState::ConfirmationProbe { k, l }.to_state(n)?;
    let returned = protocol::controlled_xor(&probe, q.j())?;
    let mut flipped = probe.clone().into_amplitudes();
    flipped[register_index(k, true)] = -flipped[register_index(k, true)];
    let flipped = StateVector::from_amplitudes(flipped)?;
    let m = qstate::discriminate(&returned, &[flipped, probe], rng)?;
    Ok(AttackReport {
        measured_k: k,
        confirmed_j: Some(m.outcome == Outcome::Index(0)),
        detected: false,
        user_answer: None,
    })
}

/// How the database picks its final fake from `(k, confirmed)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Concealment {
    /// Always the uniform state.
    Uniform,
    /// Always `|k⟩`.
    OutcomeState,
    /// `|k⟩` when confirmed, otherwise `optimal_fake(N, k)`.
    Optimal,
    /// `|k⟩` when confirmed, otherwise `ParamFake(a, b, k)`.
    Param { a: f64, b: f64 },
    /// `|k⟩` when confirmed, otherwise `ParamFake` at `α ~ U[0, π/2]`.
    RandomAlpha,
}

impl Concealment {
    pub fn choose<R: Rng + ?Sized>(
        &self,
        n: usize,
        k: usize,
        confirmed: bool,
        rng: &mut R,
    ) -> Result<FakeState> {
        Ok(match (self, confirmed) {
            (Concealment::Uniform, _) => FakeState::Uniform,
            (Concealment::OutcomeState, _) | (_, true) => FakeState::OutcomeState(k),
            (Concealment::Optimal, false) => optimal_fake(n, k)?,
            (Concealment::Param { a, b }, false) => FakeState::ParamFake { a: *a, b: *b, k },
            (Concealment::RandomAlpha, false) => {
                FakeState::from_angle(n, rng.gen_range(0.0..FRAC_PI_2), k)
            }
        })
    }
}

/// Confirmation attack followed by a concealing fake and the user's final
/// measurement.
pub fn full_attack<R: Rng + ?Sized>(
    table: &DatabaseTable,
    q: &QuerySpec,
    policy: Concealment,
    rng: &mut R,
) -> Result<AttackReport> {
    let mut report = confirmation_attack(table, q, rng)?;
    let confirmed = report.confirmed_j.unwrap_or(false);
    let fake = policy.choose(q.n(), report.measured_k, confirmed, rng)?;
    let phi = fake.to_state(q.n())?;
    let outcome = protocol::decode(&phi, q, rng)?;
    report.detected = outcome.detected_cheat;
    report.user_answer = outcome.answer;
    Ok(report)
}

/// `a = 2/√(N+3)`, `b = 1/√(N+3)`.
pub fn optimal_fake(n: usize, k: usize) -> Result<FakeState> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    if k >= n {
        return Err(QpqError::IndexOutOfRange { index: k, dim: n });
    }
    let s = ((n + 3) as f64).sqrt();
    Ok(FakeState::ParamFake {
        a: 2.0 / s,
        b: 1.0 / s,
        k,
    })
}

/// Exact average of `detection_prob_param(t, a, b)` over a rhetoric set
/// drawn uniformly from the nonempty subsets of `N - 1` indices, i.e. with
/// weights `C(N-1, t)/(2^{N-1} - 1)`.
pub fn expected_detection_over_t(n: usize, a: f64, b: f64) -> Result<f64> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    let mut acc = CompensatedSum::new();
    for (w, t) in numerics::nonempty_subset_size_pmf(n - 1)
        .into_iter()
        .zip(1..)
    {
        acc.add(w * detection_prob_param(t, a, b)?);
    }
    Ok(acc.value())
}

/// The bounded approximation `½ + ½(a - 2b)² - b² - 4(a - b)²/N`.
pub fn expected_detection_over_t_approx(n: usize, a: f64, b: f64) -> f64 {
    0.5 + 0.5 * (a - 2.0 * b).powi(2) - b * b - (a - b).powi(2) * 4.0 / n as f64
}

/// `p_{t,α}`: detection of the `α`-parametrized fake at rhetoric count `t`.
pub fn detection_prob_alpha(n: usize, t: usize, alpha: f64) -> Result<f64> {
    check_t(n, t)?;
    detection_prob_param(t, alpha.cos(), alpha.sin() / ((n - 1) as f64).sqrt())
}

fn check_t(n: usize, t: usize) -> Result<()> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    if t == 0 || t > n - 1 {
        return Err(QpqError::RhetoricCountOutOfRange { t, max: n - 1 });
    }
    Ok(())
}

/// `p̄_t`: `p_{t,α}` averaged over `α ∈ [0, π/2]`, closed form.
pub fn expected_detection_over_alpha(n: usize, t: usize) -> Result<f64> {
    check_t(n, t)?;
    Ok(expected_detection_over_alpha_real(n, t as f64))
}

/// `p̄_t` at a real-valued `t`.
pub fn expected_detection_over_alpha_real(n: usize, t: f64) -> f64 {
    let m = (n - 1) as f64;
    let root = m.sqrt();
    let head = (2.0 * n as f64 - 1.0) * PI / (4.0 * m) - 1.0 / root;
    let tail = (n as f64 * PI / (4.0 * m) - 1.0 / root) / t + PI * t / (4.0 * m);
    2.0 / PI * (head - tail)
}

/// `p̄_t` by Simpson quadrature of `p_{t,α}`.
pub fn expected_detection_over_alpha_quadrature(n: usize, t: usize) -> Result<f64> {
    check_t(n, t)?;
    let integral = numerics::simpson(
        |alpha| detection_prob_alpha(n, t, alpha).expect("t checked"),
        0.0,
        FRAC_PI_2,
        2048,
    );
    Ok(integral / FRAC_PI_2)
}

/// `t* = √(N - (4/π)√(N-1))`, the real maximizer of `p̄_t`.
pub fn optimal_t(n: usize) -> f64 {
    let n = n as f64;
    (n - 4.0 / PI * (n - 1.0).sqrt()).sqrt()
}

/// Integer rhetoric count for `t*`: the better of `⌊t*⌋` and `⌈t*⌉` under
/// `p̄_t`, clamped to `[1, N-1]`. Ties go to the smaller count.
pub fn optimal_t_integer(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    let t = optimal_t(n);
    let clamp = |x: f64| (x as usize).clamp(1, n - 1);
    let lo = clamp(t.floor());
    let hi = clamp(t.ceil());
    if expected_detection_over_alpha(n, hi)? > expected_detection_over_alpha(n, lo)? {
        Ok(hi)
    } else {
        Ok(lo)
    }
}

/// The user's best detection probability against the computational-basis
/// attack, `½ - 1/(π√(N-1)) - (2t* - 1)/(4(N-1))`.
pub fn p_maxi(n: usize) -> f64 {
    let m = (n - 1) as f64;
    0.5 - 1.0 / (PI * m.sqrt()) - (2.0 * optimal_t(n) - 1.0) / (4.0 * m)
}

/// Probability that a database which measured `k` and knows whether `k = j`
/// guesses the initial state exactly, guessing uniformly among consistent
/// candidates: `1/(2(2^{N-1}-1)) + 1/((N-1)2^{N-1})`.
pub fn recovery_probability(n: usize) -> f64 {
    let m = (n - 1) as f64;
    let p = 2f64.powf(m);
    1.0 / (2.0 * (p - 1.0)) + 1.0 / (m * p)
}

/// Largest `N` accepted by [`recovery_probability_enumerated`].
pub const RECOVERY_ENUMERATION_CAP: usize = 16;

/// [`recovery_probability`] by walking every `(j, T)` candidate and every
/// measurement outcome.
pub fn recovery_probability_enumerated(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    if n > RECOVERY_ENUMERATION_CAP {
        return Err(QpqError::BruteForceCap {
            n,
            cap: RECOVERY_ENUMERATION_CAP,
        });
    }
    let mut candidates = Vec::new();
    for j in 0..n {
        for mask in 1u32..(1 << n) {
            if mask & (1 << j) != 0 {
                continue;
            }
            let rhetoric = (0..n).filter(|&i| mask & (1 << i) != 0);
            let q = QuerySpec::randomized(n, j, rhetoric)?;
            candidates.push((j, protocol::prepare_initial(&q).probabilities()));
        }
    }
    // Consistent candidates per observation (k, k == j).
    let mut consistent: HashMap<(usize, bool), usize> = HashMap::new();
    for (j, probs) in &candidates {
        for (k, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                *consistent.entry((k, k == *j)).or_default() += 1;
            }
        }
    }
    let prior = 1.0 / candidates.len() as f64;
    let mut q = CompensatedSum::new();
    for (j, probs) in &candidates {
        for (k, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                q.add(prior * p / consistent[&(k, k == *j)] as f64);
            }
        }
    }
    Ok(q.value())
}

/// Mutual information in bits between a uniformly random true query and
/// what a computational-basis-measuring database sees against the basic
/// protocol, computed by enumerating the joint distribution.
///
/// With `with_confirmation` the observation is `(k, flag)` where `flag` is
/// the outcome of the probe round; otherwise it is `k` alone.
pub fn query_leakage_bits(n: usize, with_confirmation: bool) -> Result<f64> {
    if n < 2 {
        return Err(QpqError::TooFewItems(n));
    }
    // The probe's verdict depends only on whether k = j; read its
    // distribution off the actual probe mechanics once per case.
    let confirm_given = |k: usize, j: usize| -> Result<f64> {
        let l = if k == 0 { 1 } else { 0 };
        let probe = FakeState::ConfirmationProbe { k, l }.to_state(n)?;
        let returned = protocol::controlled_xor(&probe, j)?;
        let mut flipped = probe.clone().into_amplitudes();
        flipped[register_index(k, true)] = -flipped[register_index(k, true)];
        let flipped = StateVector::from_amplitudes(flipped)?;
        Ok(qstate::probabilities(&returned, &[flipped, probe])?.per_vector[0])
    };
    let p_confirm_hit = confirm_given(0, 0)?;
    let p_confirm_miss = confirm_given(0, 1)?;

    let obs_count = if with_confirmation { 2 * n } else { n };
    let pj = 1.0 / n as f64;
    let mut joint = vec![vec![0.0; obs_count]; n];
    for (j, row) in joint.iter_mut().enumerate() {
        let probs = protocol::prepare_initial(&QuerySpec::basic(n, j)?).probabilities();
        for (k, &pk) in probs.iter().enumerate() {
            if with_confirmation {
                let c = if k == j {
                    p_confirm_hit
                } else {
                    p_confirm_miss
                };
                row[2 * k + 1] += pj * pk * c;
                row[2 * k] += pj * pk * (1.0 - c);
            } else {
                row[k] += pj * pk;
            }
        }
    }
    let mut marginal = vec![0.0; obs_count];
    for row in &joint {
        for (m, &p) in marginal.iter_mut().zip(row) {
            *m += p;
        }
    }
    // I = H(O) - H(O|J)
    let h_obs: CompensatedSum = marginal.iter().map(|&p| -numerics::xlog2x(p)).collect();
    let h_cond: CompensatedSum = joint
        .iter()
        .flat_map(|row| row.iter().map(|&p| -pj * numerics::xlog2x(p / pj)))
        .collect();
    Ok(h_obs.value() - h_cond.value())
}

/// Empirical detection frequency against its analytic value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionStats {
    pub trials: u64,
    pub detections: u64,
    pub p_hat: f64,
    pub analytic_p: f64,
    pub three_sigma: f64,
}

impl DetectionStats {
    pub fn new(trials: u64, detections: u64, analytic_p: f64) -> Self {
        let p_hat = detections as f64 / trials as f64;
        let var = (analytic_p * (1.0 - analytic_p)).max(0.0);
        Self {
            trials,
            detections,
            p_hat,
            analytic_p,
            three_sigma: 3.0 * (var / trials as f64).sqrt(),
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.p_hat - self.analytic_p).abs()
    }

    pub fn within_three_sigma(&self) -> bool {
        self.deviation() <= self.three_sigma + 1e-12
    }
}
