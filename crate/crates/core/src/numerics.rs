//! Small numerical helpers shared by the analytic modules.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// `C(m, k)/2^m` for every `k` in `0..=m`, built by term ratios outward
/// from the mode and normalized by the computed total. Far tails underflow
/// to zero instead of overflowing.
pub fn binomial_half_pmf(m: usize) -> Vec<f64> {
    let mode = m / 2;
    let mut w = vec![0.0; m + 1];
    w[mode] = 1.0;
    for k in mode..m {
        w[k + 1] = w[k] * (m - k) as f64 / (k + 1) as f64;
    }
    for k in (1..=mode).rev() {
        w[k - 1] = w[k] * k as f64 / (m - k + 1) as f64;
    }
    let total = w.iter().copied().collect::<CompensatedSum>().value();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// `C(m, t)/(2^m - 1)` for `t` in `1..=m` (index `t - 1`): the size
/// distribution of a uniformly random nonempty subset of `m` elements.
pub fn nonempty_subset_size_pmf(m: usize) -> Vec<f64> {
    let mut w = binomial_half_pmf(m);
    w.remove(0);
    let total = w.iter().copied().collect::<CompensatedSum>().value();
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (hi - lo) / n as f64;
    let mut s = CompensatedSum::new();
    s.add(f(lo));
    s.add(f(hi));
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s.add(w * f(lo + i as f64 * h));
    }
    s.value() * h / 3.0
}

/// `x log₂ x` with the `0 log 0 = 0` convention.
pub(crate) fn xlog2x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.log2()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn binomial_pmf_small_rows() {
        let row = binomial_half_pmf(5);
        let exact = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        for (w, e) in row.iter().zip(exact) {
            assert!((w * 32.0 - e).abs() < 1e-13);
        }
        assert_eq!(binomial_half_pmf(0), vec![1.0]);
        let sub = nonempty_subset_size_pmf(3);
        for (w, e) in sub.iter().zip([3.0, 3.0, 1.0]) {
            assert!((w * 7.0 - e).abs() < 1e-14);
        }
    }

    #[test]
    fn binomial_pmf_large_row_is_finite_and_normalized() {
        let row = binomial_half_pmf(5000);
        assert!(row.iter().all(|w| w.is_finite() && *w >= 0.0));
        let total: f64 = row.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Central term against Stirling: C(m, m/2)/2^m ≈ √(2/(πm)).
        let stirling = (2.0 / (std::f64::consts::PI * 5000.0)).sqrt();
        assert!((row[2500] / stirling - 1.0).abs() < 1e-4);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 4);
        assert!((v - 0.0).abs() < 1e-12);
    }
}
