//! Spec examples checked against independently computed reference values.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qpqlab_core::adversary::{self, FakeState};
use qpqlab_core::interrogation::{self, InitialState, InterrogationSpec};
use qpqlab_core::protocol::{self, DatabaseTable, QuerySpec};
use qpqlab_core::qstate::{self, Outcome, StateVector};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plain composite Simpson rule, kept separate from the library's.
fn simpson_oracle(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let h = (hi - lo) / panels as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..panels {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `p̄_t` from amplitudes: average the amplitude-based detection of the
/// α-parametrized fake over `α ∈ [0, π/2]`.
fn alpha_average_from_amplitudes(q: &QuerySpec) -> f64 {
    let n = q.n();
    let k = q.rhetoric()[0];
    let f = |alpha: f64| {
        adversary::detection_probability(&FakeState::from_angle(n, alpha, k), q).unwrap()
    };
    simpson_oracle(f, 0.0, FRAC_PI_2, 256) / FRAC_PI_2
}

#[test]
fn basic_initial_state_n4() {
    let q = QuerySpec::basic(4, 2).unwrap();
    let s = protocol::prepare_initial(&q);
    let r = 1.0 / 6f64.sqrt();
    for (i, want) in [r, r, FRAC_1_SQRT_2, r].iter().enumerate() {
        assert!((s.amplitude(i) - Complex64::new(*want, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn randomized_initial_state_n5() {
    let q = QuerySpec::randomized(5, 0, [2, 3]).unwrap();
    let s = protocol::prepare_initial(&q);
    for (i, want) in [FRAC_1_SQRT_2, 0.0, 0.5, 0.5, 0.0].iter().enumerate() {
        assert!((s.amplitude(i).re - want).abs() < 1e-15);
        assert_eq!(s.amplitude(i).im, 0.0);
    }
}

#[test]
fn overlap_footnote_n3() {
    let a = protocol::prepare_initial(&QuerySpec::basic(3, 0).unwrap());
    let b = protocol::prepare_initial(&QuerySpec::basic(3, 1).unwrap());
    let ov = a.inner(&b).unwrap();
    assert!(close(ov.re, FRAC_1_SQRT_2 + 0.25, 1e-12));
    assert!(close(ov.re, 0.957_11, 1e-5));
}

#[test]
fn basic_state_measurement_frequencies_n5() {
    let n = 5;
    let j = 3;
    let s = protocol::prepare_initial(&QuerySpec::basic(n, j).unwrap());
    let trials = 100_000u64;
    let mut counts = vec![0u64; n];
    let mut r = rng(11);
    for _ in 0..trials {
        if let Outcome::Index(i) = qstate::measure_computational(&s, &mut r).unwrap().outcome {
            counts[i] += 1;
        }
    }
    for (i, &c) in counts.iter().enumerate() {
        let p = if i == j { 0.5 } else { 1.0 / 8.0 };
        let sigma3 = 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        let f = c as f64 / trials as f64;
        assert!((f - p).abs() <= sigma3, "index {i}: {f} vs {p}");
    }
}

#[test]
fn hand_traced_honest_run() {
    // A = (1, 0, 1), j = 0, basic form, N = 3.
    let table = DatabaseTable::new(vec![true, false, true]).unwrap();
    let q = QuerySpec::basic(3, 0).unwrap();
    let (answer, transcript) = protocol::run_honest(&table, &q, &mut rng(1)).unwrap();
    assert_eq!(answer.answer, Some(true));
    assert!(!answer.detected_cheat);

    // Index 2i + b for |i⟩|b⟩.
    let h = FRAC_1_SQRT_2;
    let expect = |v: [f64; 6], s: &StateVector| {
        for (i, want) in v.iter().enumerate() {
            assert!((s.amplitude(i).re - want).abs() < 1e-15, "index {i}");
            assert!(s.amplitude(i).im.abs() < 1e-15);
        }
    };
    expect([0.0, h, 0.5, 0.0, 0.0, 0.5], &transcript.retrieved);
    expect([0.0, -h, 0.5, 0.0, 0.0, 0.5], &transcript.phased);
    expect([-h, 0.0, 0.5, 0.0, 0.5, 0.0], &transcript.uncomputed);
}

#[test]
fn transcript_cost_is_logarithmic() {
    for n in [2usize, 3, 4, 5, 64, 65, 1000] {
        let q = QuerySpec::basic(n, 0).unwrap();
        let table = DatabaseTable::zeros(n).unwrap();
        let (_, tr) = protocol::run_honest(&table, &q, &mut rng(0)).unwrap();
        let bits = (n as f64).log2().ceil() as usize;
        assert_eq!(tr.total_qubits(), 4 * bits + 2, "N = {n}");
        assert_eq!(tr.rounds(), 2);
    }
}

#[test]
fn finals_are_orthogonal_and_minus_has_negative_j() {
    let mut r = rng(5);
    for _ in 0..200 {
        let n = 2 + (rand::Rng::gen_range(&mut r, 0..60));
        let j = rand::Rng::gen_range(&mut r, 0..n);
        let q = QuerySpec::random_subset(n, j, &mut r).unwrap();
        let (p, m) = protocol::expected_finals(&q);
        assert!(p.inner(&m).unwrap().norm() < 1e-12);
    }
    let (_, m) = protocol::expected_finals(&QuerySpec::basic(4, 2).unwrap());
    assert!(close(m.amplitude(2).re, -FRAC_1_SQRT_2, 1e-15));
}

#[test]
fn uniform_fake_detection_values() {
    for n in 2..=64 {
        let q = QuerySpec::basic(n, n / 2).unwrap();
        let p = adversary::detection_probability(&FakeState::Uniform, &q).unwrap();
        assert!(p.abs() < 1e-12, "N = {n}");
    }
    let q = QuerySpec::random_with_size(10, 7, 4, &mut rng(2)).unwrap();
    let p = adversary::detection_probability(&FakeState::Uniform, &q).unwrap();
    assert!(close(p, 0.5, 1e-12));
}

#[test]
fn discriminate_uniform_against_randomized_finals() {
    let q = QuerySpec::randomized(9, 0, [1, 4, 6]).unwrap();
    let (p, m) = protocol::expected_finals(&q);
    let probs =
        qstate::probabilities(&StateVector::uniform(9).unwrap(), &[p.clone(), m.clone()]).unwrap();
    assert!(close(probs.other, 1.0 - 4.0 / 9.0, 1e-12));
    let mut r = rng(3);
    let trials = 50_000u64;
    let mut other = 0u64;
    for _ in 0..trials {
        let out = qstate::discriminate(
            &StateVector::uniform(9).unwrap(),
            &[p.clone(), m.clone()],
            &mut r,
        )
        .unwrap();
        if out.outcome == Outcome::Other {
            other += 1;
        }
    }
    let f = other as f64 / trials as f64;
    let pt = 5.0 / 9.0;
    assert!((f - pt).abs() <= 3.0 * (pt * (1.0 - pt) / trials as f64).sqrt());
}

#[test]
fn detection_formula_spot_values() {
    assert!(close(
        adversary::detection_prob_param(1, 1.0, 0.0).unwrap(),
        0.0,
        1e-15
    ));
    assert!(close(
        adversary::detection_prob_param(4, 1.0, 0.0).unwrap(),
        0.75,
        1e-15
    ));

    let n = 13;
    let FakeState::ParamFake { a, b, .. } = adversary::optimal_fake(n, 0).unwrap() else {
        panic!("optimal fake is parametrized");
    };
    assert!(close(a, 0.5, 1e-15) && close(b, 0.25, 1e-15));
    let mut r = rng(4);
    for _ in 0..20 {
        let q = QuerySpec::random_with_size(n, 5, 3, &mut r).unwrap();
        let k = q.rhetoric()[1];
        let amp = adversary::detection_probability(&FakeState::ParamFake { a, b, k }, &q).unwrap();
        assert!(close(
            amp,
            adversary::detection_prob_param(3, a, b).unwrap(),
            1e-12
        ));
    }
}

/// Averages amplitude-based detection over every nonempty rhetoric set of a
/// small database, placing the fake on a uniformly chosen member of `T`.
fn subset_enumeration_average(n: usize, a: f64, b: f64) -> f64 {
    let j = 0;
    let others: Vec<usize> = (1..n).collect();
    let mut total = 0.0;
    let mut count = 0u64;
    for mask in 1u32..(1 << (n - 1)) {
        let t: Vec<usize> = others
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, &i)| i)
            .collect();
        let q = QuerySpec::randomized(n, j, t.iter().copied()).unwrap();
        let mut inner = 0.0;
        for &k in &t {
            inner +=
                adversary::detection_probability(&FakeState::ParamFake { a, b, k }, &q).unwrap();
        }
        total += inner / t.len() as f64;
        count += 1;
    }
    total / count as f64
}

#[test]
fn t_average_matches_subset_enumeration() {
    for n in [3usize, 5, 8, 11] {
        for &a in &[0.0, 0.3, 2.0 / ((n + 3) as f64).sqrt(), 0.9] {
            let b = ((1.0 - a * a) / (n - 1) as f64).sqrt();
            let exact = adversary::expected_detection_over_t(n, a, b).unwrap();
            let oracle = subset_enumeration_average(n, a, b);
            assert!(
                close(exact, oracle, 1e-12),
                "N={n} a={a}: {exact} vs {oracle}"
            );
        }
    }
}

#[test]
fn optimal_fake_t_average_values() {
    let at = |n: usize| {
        let s = ((n + 3) as f64).sqrt();
        adversary::expected_detection_over_t(n, 2.0 / s, 1.0 / s).unwrap()
    };
    assert!(close(at(20), 0.5 - 1.0 / 23.0, 0.05));
    assert!(close(at(997), 0.5 - 1.0 / 1000.0, 0.02));
}

#[test]
fn grid_argmin_over_a() {
    let step = 0.005;
    for n in [50usize, 100, 200] {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200 {
            let a = i as f64 * step;
            let b = ((1.0 - a * a).max(0.0) / (n - 1) as f64).sqrt();
            let v = adversary::expected_detection_over_t(n, a, b).unwrap();
            if v < best.0 {
                best = (v, a);
            }
        }
        let target = 2.0 / ((n + 3) as f64).sqrt();
        assert!(
            (best.1 - target).abs() <= step,
            "N={n}: {} vs {target}",
            best.1
        );
    }
}

#[test]
fn alpha_average_closed_form_matches_amplitude_quadrature() {
    let mut r = rng(6);
    for _ in 0..40 {
        let n = rand::Rng::gen_range(&mut r, 2..120usize);
        let t = rand::Rng::gen_range(&mut r, 1..n);
        let q = QuerySpec::random_with_size(n, 0, t, &mut r).unwrap();
        let closed = adversary::expected_detection_over_alpha(n, t).unwrap();
        let oracle = alpha_average_from_amplitudes(&q);
        assert!(
            close(closed, oracle, 1e-9),
            "N={n} t={t}: {closed} vs {oracle}"
        );
    }
}

#[test]
fn optimal_t_values() {
    assert!(close(
        adversary::optimal_t(101),
        (101.0 - 40.0 / PI).sqrt(),
        1e-12
    ));
    assert!(close(adversary::optimal_t(101), 9.395, 1e-3));
    assert_eq!(adversary::optimal_t_integer(2).unwrap(), 1);
    for n in [16usize, 50, 101, 300] {
        let argmax = (1..n)
            .max_by(|&x, &y| {
                let px = adversary::expected_detection_over_alpha(n, x).unwrap();
                let py = adversary::expected_detection_over_alpha(n, y).unwrap();
                px.partial_cmp(&py).unwrap()
            })
            .unwrap();
        assert!(argmax.abs_diff(adversary::optimal_t_integer(n).unwrap()) <= 1);
    }
}

#[test]
fn p_maxi_values() {
    // Quadrature at the integer argmax, then the confirmed-branch halving.
    let n = 101;
    let best = (1..n)
        .map(|t| {
            let q = QuerySpec::random_with_size(n, 0, t, &mut rng(t as u64)).unwrap();
            alpha_average_from_amplitudes(&q)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(close(0.5 * best, 0.4237, 5e-4));
    assert!(close(adversary::p_maxi(n), 0.4237, 5e-5));
    let big = adversary::p_maxi(1_000_000);
    assert!(big > 0.49 && big < 0.5);
}

#[test]
fn recovery_values() {
    assert!(close(
        adversary::recovery_probability(4),
        1.0 / 14.0 + 1.0 / 24.0,
        1e-12
    ));
    assert!(close(adversary::recovery_probability(4), 0.113_095, 1e-6));
    assert!(close(adversary::recovery_probability(2), 1.0, 1e-12));
    assert!(adversary::recovery_probability(30) < 1e-7);
    for n in 2..=12 {
        let e = adversary::recovery_probability_enumerated(n).unwrap();
        assert!(close(e, adversary::recovery_probability(n), 1e-12), "N={n}");
    }
}

#[test]
fn leakage_values() {
    for n in [2usize, 3, 7, 16, 100, 256] {
        let m = (n - 1) as f64;
        let nf = n as f64;
        let with = adversary::query_leakage_bits(n, true).unwrap();
        let without = adversary::query_leakage_bits(n, false).unwrap();
        assert!(close(with, nf.log2() - 0.5 * m.log2(), 1e-9), "N={n}");
        assert!(
            close(without, nf.log2() - 1.0 - 0.5 * m.log2(), 1e-9),
            "N={n}"
        );
    }
    assert!(close(
        adversary::query_leakage_bits(256, true).unwrap(),
        4.0028,
        1e-4
    ));
}

#[test]
fn interrogation_values() {
    for n in 2..=12 {
        let psi = InterrogationSpec::new(InitialState::PsiPrime0 { j: n - 1 }, n).unwrap();
        let qpq = InterrogationSpec::new(InitialState::QpqState { j: 1 }, n).unwrap();
        let b = interrogation::interrogate_bruteforce(&psi)
            .unwrap()
            .expected_zeros;
        assert!(close(b, n as f64 / 2.0, 1e-9));
        let a = interrogation::expected_zeros_analytic(&psi)
            .unwrap()
            .expected_zeros;
        assert!(close(a, b, 1e-9));
        let b = interrogation::interrogate_bruteforce(&qpq)
            .unwrap()
            .expected_zeros;
        assert!(close(b, n as f64 / 2.0 + 0.5, 1e-9));
    }
    for n in [4usize, 9] {
        let u = InterrogationSpec::new(InitialState::UniformSuperposition, n).unwrap();
        let v = interrogation::interrogate_bruteforce(&u)
            .unwrap()
            .expected_zeros;
        assert!(close(v, n as f64 / 2.0 + (n as f64).sqrt() / 2.0, 0.05));
    }
    let psi = InterrogationSpec::new(InitialState::PsiPrime0 { j: 3 }, 50).unwrap();
    let qpq = InterrogationSpec::new(InitialState::QpqState { j: 3 }, 50).unwrap();
    assert!(close(
        interrogation::expected_zeros_analytic(&psi)
            .unwrap()
            .expected_zeros,
        25.0,
        1e-6
    ));
    assert!(close(
        interrogation::expected_zeros_analytic(&qpq)
            .unwrap()
            .expected_zeros,
        25.5,
        1e-6
    ));
}

#[test]
fn binomial_identities_against_u128_sums() {
    for n in 2..=64usize {
        let m = n - 1;
        let mut row = vec![1u128];
        for k in 0..m {
            row.push(row[k] * (m - k) as u128 / (k + 1) as u128);
        }
        let sum = |p: u32, shift: u128| -> u128 {
            row.iter()
                .enumerate()
                .map(|(k, c)| c * (k as u128 + shift).pow(p))
                .sum()
        };
        let report = interrogation::verify_binomial_identities(n).unwrap();
        assert!(report.all_hold(), "N={n}");
        let lhs: Vec<String> = report.checks.iter().map(|c| c.lhs.to_string()).collect();
        let want = [
            sum(1, 1),
            sum(1, 0),
            sum(2, 1),
            sum(2, 0),
            sum(3, 1),
            sum(3, 0),
        ];
        for (got, w) in lhs.iter().zip(want) {
            assert_eq!(got, &w.to_string(), "N={n}");
        }
    }
    let r = interrogation::verify_binomial_identities(4).unwrap();
    assert_eq!(r.checks[0].lhs.to_string(), "20");
}
