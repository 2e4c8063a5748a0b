//! Monte Carlo driver.
//!
//! Trial `i` of a run draws from a ChaCha8 stream keyed by
//! `(master_seed, i)`, so a run's results depend only on its configuration
//! and seed. Trials fan out over a rayon pool and are reduced in index order.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{self, Concealment, DetectionStats, FakeState};
use crate::baselines::{self, BaselineKind, STANDARD_ANSWER};
use crate::error::{QpqError, Result};
use crate::numerics::{self, CompensatedSum};
use crate::protocol::{self, DatabaseTable, QuerySpec};

/// Tolerance for `--strict` analytic cross-checks.
pub const STRICT_TOL: f64 = 1e-9;

/// How each trial picks its rhetoric set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TPolicy {
    /// `T = [N] \ {j}`.
    Basic,
    /// Uniform over subsets of a fixed size.
    Fixed(usize),
    /// Uniform over all nonempty subsets.
    UniformSubset,
    /// Fixed size at the integer optimum of `t`.
    Optimal,
}

impl TPolicy {
    pub fn label(&self) -> String {
        match self {
            TPolicy::Basic => "basic".into(),
            TPolicy::Fixed(t) => format!("fixed:{t}"),
            TPolicy::UniformSubset => "uniform-subset".into(),
            TPolicy::Optimal => "optimal".into(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, j: usize, rng: &mut R) -> Result<QuerySpec> {
        match *self {
            TPolicy::Basic => QuerySpec::basic(n, j),
            TPolicy::Fixed(t) => QuerySpec::random_with_size(n, j, t, rng),
            TPolicy::UniformSubset => QuerySpec::random_subset(n, j, rng),
            TPolicy::Optimal => {
                QuerySpec::random_with_size(n, j, adversary::optimal_t_integer(n)?, rng)
            }
        }
    }

    /// `E[f(t)]` under this policy.
    pub fn expectation<F: Fn(usize) -> f64>(&self, n: usize, f: F) -> Result<f64> {
        Ok(match *self {
            TPolicy::Basic => f(n - 1),
            TPolicy::Fixed(t) => f(t),
            TPolicy::Optimal => f(adversary::optimal_t_integer(n)?),
            TPolicy::UniformSubset => {
                let acc: CompensatedSum = numerics::nonempty_subset_size_pmf(n - 1)
                    .into_iter()
                    .zip(1..n)
                    .map(|(w, t)| w * f(t))
                    .collect();
                acc.value()
            }
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Scenario {
    Honest,
    /// Measurement plus probe round only.
    Confirmation,
    /// Probe round followed by the given concealing fake.
    Attack(Concealment),
    Baseline(BaselineKind),
}

impl Scenario {
    pub fn label(&self) -> String {
        match self {
            Scenario::Honest => "honest".into(),
            Scenario::Confirmation => "confirmation".into(),
            Scenario::Attack(c) => format!("attack:{}", concealment_label(c)),
            Scenario::Baseline(BaselineKind::Qpq) => "baseline:qpq".into(),
            Scenario::Baseline(BaselineKind::PhaseEncoded) => "baseline:phase".into(),
        }
    }
}

pub fn concealment_label(c: &Concealment) -> String {
    match c {
        Concealment::Uniform => "uniform".into(),
        Concealment::OutcomeState => "outcome".into(),
        Concealment::Optimal => "optimal".into(),
        Concealment::Param { a, b } => format!("param({a},{b})"),
        Concealment::RandomAlpha => "random-alpha".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub t_policy: TPolicy,
    pub trials: u64,
    pub master_seed: u64,
    /// Worker threads; 0 lets rayon decide. Never affects results.
    pub workers: usize,
    pub strict: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(QpqError::Config {
                field: "trials",
                reason: "must be at least 1".into(),
            });
        }
        if self.n < 2 {
            return Err(QpqError::Config {
                field: "n",
                reason: format!("must be at least 2, got {}", self.n),
            });
        }
        if let TPolicy::Fixed(t) = self.t_policy {
            if t == 0 || t > self.n - 1 {
                return Err(QpqError::Config {
                    field: "t",
                    reason: format!("must lie in [1, {}], got {t}", self.n - 1),
                });
            }
        }
        Ok(())
    }
}

/// Independent random stream for trial `index` of a run seeded with
/// `master_seed`.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` for trial indices `offset..offset + count` and returns the
/// results in index order.
pub fn run_indexed<T, F>(
    master_seed: u64,
    offset: u64,
    count: u64,
    workers: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| QpqError::Config {
            field: "workers",
            reason: e.to_string(),
        })?;
    pool.install(|| {
        (offset..offset + count)
            .into_par_iter()
            .map(|i| f(&mut trial_rng(master_seed, i)))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRecord {
    pub metric: String,
    pub analytic: f64,
    pub empirical: f64,
    pub trials: u64,
    pub three_sigma: f64,
    pub pass: bool,
}

impl MetricRecord {
    fn from_counts(metric: &str, trials: u64, hits: u64, analytic: f64) -> Self {
        let stats = DetectionStats::new(trials, hits, analytic);
        Self {
            metric: metric.into(),
            analytic,
            empirical: stats.p_hat,
            trials,
            three_sigma: stats.three_sigma,
            pass: stats.within_three_sigma(),
        }
    }

    fn exact(metric: &str, analytic: f64, recomputed: f64) -> Self {
        Self {
            metric: metric.into(),
            analytic,
            empirical: recomputed,
            trials: 0,
            three_sigma: STRICT_TOL,
            pass: (analytic - recomputed).abs() <= STRICT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub scenario: String,
    pub n: usize,
    pub t_policy: String,
    pub trials: u64,
    pub seed: u64,
    pub metrics: Vec<MetricRecord>,
    /// Excluded from serialized output so files are reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }
}

fn random_query_index<R: Rng + ?Sized>(n: usize, rng: &mut R) -> usize {
    rng.gen_range(0..n)
}

/// Executes the configured scenario and compares every empirical rate with
/// its analytic value.
pub fn run_trials(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let n = config.n;
    let trials = config.trials;
    let policy = config.t_policy;
    let run = |f: &(dyn Fn(&mut ChaCha8Rng) -> Result<[bool; 2]> + Sync)| {
        let outcomes = run_indexed(config.master_seed, 0, trials, config.workers, f)?;
        let mut counts = [0u64; 2];
        for o in outcomes {
            for (c, hit) in counts.iter_mut().zip(o) {
                *c += hit as u64;
            }
        }
        Ok::<_, QpqError>(counts)
    };

    let mut metrics = Vec::new();
    match config.scenario {
        Scenario::Honest => {
            let [wrong, detected] = run(&|rng| {
                let table = DatabaseTable::random(n, rng)?;
                let q = policy.sample(n, random_query_index(n, rng), rng)?;
                let (res, _) = protocol::run_honest(&table, &q, rng)?;
                Ok([res.answer != Some(table.bit(q.j())), res.detected_cheat])
            })?;
            metrics.push(MetricRecord::from_counts(
                "answer_failures",
                trials,
                wrong,
                0.0,
            ));
            metrics.push(MetricRecord::from_counts(
                "detections",
                trials,
                detected,
                0.0,
            ));
        }
        Scenario::Confirmation => {
            let [hit_j, mismatch] = run(&|rng| {
                let table = DatabaseTable::random(n, rng)?;
                let q = policy.sample(n, random_query_index(n, rng), rng)?;
                let r = adversary::confirmation_attack(&table, &q, rng)?;
                let k_is_j = r.measured_k == q.j();
                Ok([k_is_j, r.confirmed_j != Some(k_is_j)])
            })?;
            metrics.push(MetricRecord::from_counts("measured_j", trials, hit_j, 0.5));
            metrics.push(MetricRecord::from_counts(
                "confirmation_errors",
                trials,
                mismatch,
                0.0,
            ));
        }
        Scenario::Attack(concealment) => {
            let [hit_j, detected] = run(&|rng| {
                let table = DatabaseTable::random(n, rng)?;
                let q = policy.sample(n, random_query_index(n, rng), rng)?;
                let r = adversary::full_attack(&table, &q, concealment, rng)?;
                Ok([r.confirmed_j == Some(true), r.detected])
            })?;
            let analytic = attack_detection_analytic(n, policy, concealment)?;
            metrics.push(MetricRecord::from_counts("measured_j", trials, hit_j, 0.5));
            metrics.push(MetricRecord::from_counts(
                "detection",
                trials,
                detected,
                analytic,
            ));
            if config.strict {
                if let Some(cross) = attack_crosscheck(n, policy, concealment)? {
                    metrics.push(cross);
                }
            }
        }
        Scenario::Baseline(kind) => {
            let [ident, detected] = run(&|rng| {
                let mut bits: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
                bits[0] = STANDARD_ANSWER;
                let table = DatabaseTable::new(bits)?;
                let j = rng.gen_range(1..n);
                let r = match kind {
                    BaselineKind::Qpq => baselines::qpq_attack(&table, j, rng)?,
                    BaselineKind::PhaseEncoded => {
                        baselines::phase_encoded_attack(&table, j, rng)?.report
                    }
                };
                Ok([r.identified_j, r.detected])
            })?;
            let (id_p, det_p) = match kind {
                BaselineKind::Qpq => (1.0, 0.5),
                BaselineKind::PhaseEncoded => (0.5, 0.0),
            };
            metrics.push(MetricRecord::from_counts(
                "identified_j",
                trials,
                ident,
                id_p,
            ));
            metrics.push(MetricRecord::from_counts(
                "detection",
                trials,
                detected,
                det_p,
            ));
        }
    }

    Ok(RunRecord {
        scenario: config.scenario.label(),
        n,
        t_policy: policy.label(),
        trials,
        seed: config.master_seed,
        metrics,
        wall_clock: start.elapsed(),
    })
}

/// Overall detection probability of `full_attack` under `concealment`,
/// averaged over the query distribution of `policy`.
pub fn attack_detection_analytic(
    n: usize,
    policy: TPolicy,
    concealment: Concealment,
) -> Result<f64> {
    let nf = n as f64;
    match concealment {
        // The uniform state does not depend on k.
        Concealment::Uniform => policy.expectation(n, |t| 1.0 - (t as f64 + 1.0) / nf),
        // |k⟩ is invisible when k = j and flagged w.p. 1 - 1/t otherwise.
        Concealment::OutcomeState => policy.expectation(n, |t| 0.5 * (1.0 - 1.0 / t as f64)),
        Concealment::Optimal => {
            let s = (nf + 3.0).sqrt();
            let (a, b) = (2.0 / s, 1.0 / s);
            policy.expectation(n, |t| {
                0.5 * adversary::detection_prob_param(t, a, b).unwrap()
            })
        }
        Concealment::Param { a, b } => policy.expectation(n, |t| {
            0.5 * adversary::detection_prob_param(t, a, b).unwrap()
        }),
        Concealment::RandomAlpha => policy.expectation(n, |t| {
            0.5 * adversary::expected_detection_over_alpha(n, t).unwrap()
        }),
    }
}

/// Recomputes the per-`t` closed form on one representative query from
/// amplitudes.
fn attack_crosscheck(
    n: usize,
    policy: TPolicy,
    concealment: Concealment,
) -> Result<Option<MetricRecord>> {
    let t = match policy {
        TPolicy::Basic => n - 1,
        TPolicy::Fixed(t) => t,
        TPolicy::Optimal => adversary::optimal_t_integer(n)?,
        TPolicy::UniformSubset => (n - 1).div_ceil(2),
    };
    let q = QuerySpec::randomized(n, 0, 1..=t)?;
    let row = match concealment {
        Concealment::Uniform => MetricRecord::exact(
            "analytic_crosscheck",
            1.0 - (t as f64 + 1.0) / n as f64,
            adversary::detection_probability(&FakeState::Uniform, &q)?,
        ),
        Concealment::Optimal => {
            let fake = adversary::optimal_fake(n, 1)?;
            let FakeState::ParamFake { a, b, .. } = fake else {
                unreachable!()
            };
            MetricRecord::exact(
                "analytic_crosscheck",
                adversary::detection_prob_param(t, a, b)?,
                adversary::detection_probability(&fake, &q)?,
            )
        }
        Concealment::Param { a, b } => MetricRecord::exact(
            "analytic_crosscheck",
            adversary::detection_prob_param(t, a, b)?,
            adversary::detection_probability(&FakeState::ParamFake { a, b, k: 1 }, &q)?,
        ),
        Concealment::RandomAlpha => MetricRecord::exact(
            "analytic_crosscheck",
            adversary::expected_detection_over_alpha(n, t)?,
            adversary::expected_detection_over_alpha_quadrature(n, t)?,
        ),
        Concealment::OutcomeState => MetricRecord::exact(
            "analytic_crosscheck",
            1.0 - 1.0 / t as f64,
            adversary::detection_probability(&FakeState::OutcomeState(1), &q)?,
        ),
    };
    Ok(Some(row))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: usize,
    pub analytic: f64,
    pub empirical: f64,
    /// Trials that landed on the `k ≠ j` branch.
    pub branch_trials: u64,
    pub three_sigma: f64,
    pub pass: bool,
    pub argmax: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub n: usize,
    pub optimal_t: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn argmax_t(&self) -> Option<usize> {
        self.rows.iter().find(|r| r.argmax).map(|r| r.t)
    }
}

/// Rhetoric counts visited by a sweep: every `t` when `N - 1 ≤ max_rows`,
/// otherwise a strided subset that always includes the neighbours of `t*`.
pub fn sweep_points(n: usize, max_rows: usize) -> Vec<usize> {
    let top = n - 1;
    if top <= max_rows.max(1) {
        return (1..=top).collect();
    }
    let stride = top.div_ceil(max_rows.max(1));
    let t = adversary::optimal_t(n);
    let mut pts: Vec<usize> = (1..=top).step_by(stride).collect();
    pts.push((t.floor() as usize).clamp(1, top));
    pts.push((t.ceil() as usize).clamp(1, top));
    pts.push(top);
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// `p̄_t` per rhetoric count: closed form next to the detection rate of the
/// `α`-uniform concealing fake on the `k ≠ j` branch.
pub fn sweep_t(
    n: usize,
    trials: u64,
    seed: u64,
    workers: usize,
    max_rows: usize,
) -> Result<SweepTable> {
    if n < 2 {
        return Err(QpqError::Config {
            field: "n",
            reason: format!("must be at least 2, got {n}"),
        });
    }
    if trials == 0 {
        return Err(QpqError::Config {
            field: "trials",
            reason: "must be at least 1".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, t) in sweep_points(n, max_rows).into_iter().enumerate() {
        let outcomes = run_indexed(seed, idx as u64 * trials, trials, workers, |rng| {
            let table = DatabaseTable::random(n, rng)?;
            let q = QuerySpec::random_with_size(n, random_query_index(n, rng), t, rng)?;
            let r = adversary::full_attack(&table, &q, Concealment::RandomAlpha, rng)?;
            Ok((r.confirmed_j == Some(false), r.detected))
        })?;
        let branch = outcomes.iter().filter(|o| o.0).count() as u64;
        let detected = outcomes.iter().filter(|o| o.0 && o.1).count() as u64;
        let analytic = adversary::expected_detection_over_alpha(n, t)?;
        let stats = DetectionStats::new(branch.max(1), detected, analytic);
        rows.push(SweepRow {
            t,
            analytic,
            empirical: stats.p_hat,
            branch_trials: branch,
            three_sigma: stats.three_sigma,
            pass: stats.within_three_sigma(),
            argmax: false,
        });
    }
    if let Some(best) = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.analytic.total_cmp(&b.1.analytic).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
    {
        rows[best].argmax = true;
    }
    Ok(SweepTable {
        n,
        optimal_t: adversary::optimal_t(n),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn config(scenario: Scenario, n: usize, t_policy: TPolicy, trials: u64) -> ExperimentConfig {
        ExperimentConfig {
            scenario,
            n,
            t_policy,
            trials,
            master_seed: 99,
            workers: 2,
            strict: true,
        }
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let a = trial_rng(1, 0).next_u64();
        assert_eq!(a, trial_rng(1, 0).next_u64());
        assert_ne!(a, trial_rng(1, 1).next_u64());
        assert_ne!(a, trial_rng(2, 0).next_u64());
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut c = config(Scenario::Honest, 5, TPolicy::Basic, 0);
        assert!(matches!(
            c.validate(),
            Err(QpqError::Config {
                field: "trials",
                ..
            })
        ));
        c.trials = 1;
        c.n = 1;
        assert!(matches!(
            c.validate(),
            Err(QpqError::Config { field: "n", .. })
        ));
        c.n = 5;
        c.t_policy = TPolicy::Fixed(5);
        assert!(matches!(
            c.validate(),
            Err(QpqError::Config { field: "t", .. })
        ));
    }

    #[test]
    fn honest_scenario_has_no_failures() {
        let r = run_trials(&config(Scenario::Honest, 17, TPolicy::UniformSubset, 500)).unwrap();
        assert!(r.passed());
        assert_eq!(r.metrics[0].empirical, 0.0);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut c = config(
            Scenario::Attack(Concealment::Optimal),
            11,
            TPolicy::Fixed(3),
            2000,
        );
        c.workers = 1;
        let one = run_trials(&c).unwrap();
        c.workers = 5;
        let five = run_trials(&c).unwrap();
        assert_eq!(one.metrics, five.metrics);
    }

    #[test]
    fn uniform_subset_expectation_of_constant_is_one() {
        let v = TPolicy::UniformSubset.expectation(30, |_| 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_points_stride_keeps_optimum() {
        let pts = sweep_points(1024, 50);
        let t = adversary::optimal_t(1024);
        assert!(pts.contains(&(t.floor() as usize)));
        assert!(pts.contains(&(t.ceil() as usize)));
        assert_eq!(sweep_points(20, 50), (1..20).collect::<Vec<_>>());
    }

    #[test]
    fn small_sweep_matches_closed_form_column() {
        let table = sweep_t(12, 400, 3, 2, 64).unwrap();
        assert_eq!(table.rows.len(), 11);
        for row in &table.rows {
            let exact = adversary::expected_detection_over_alpha(12, row.t).unwrap();
            assert!((row.analytic - exact).abs() < 1e-12);
        }
        assert_eq!(table.rows.iter().filter(|r| r.argmax).count(), 1);
    }
}
