//! Streaming statistics, log-domain importance weights and least-squares fits.

use serde::{Deserialize, Serialize};

/// Welford accumulator with Chan's parallel merge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance (0 for fewer than two samples).
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Self-normalized importance-weighted mean with weights `exp(log_w)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedMean {
    pub mean: f64,
    /// Delta-method standard error.
    pub stderr: f64,
    /// Kish effective sample size.
    pub ess: f64,
    pub n: usize,
}

pub fn weighted_mean(values: &[f64], log_w: &[f64]) -> WeightedMean {
    assert_eq!(values.len(), log_w.len());
    let n = values.len();
    if n == 0 {
        return WeightedMean { mean: f64::NAN, stderr: f64::NAN, ess: 0.0, n };
    }
    let m = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - m).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let mean = w.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / sw;
    let var = w
        .iter()
        .zip(values)
        .map(|(a, b)| a * a * (b - mean) * (b - mean))
        .sum::<f64>()
        / (sw * sw);
    WeightedMean { mean, stderr: var.sqrt(), ess: sw * sw / sw2, n }
}

/// Ordinary least squares y = intercept + slope x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = if x.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    LinearFit { slope, intercept, r_squared, slope_stderr }
}

/// Delete-one jackknife of a statistic over `groups` batches.
/// Returns (full-sample value, jackknife standard error).
pub fn jackknife<T, F>(groups: &[T], stat: F) -> (f64, f64)
where
    F: Fn(&[&T]) -> f64,
{
    let all: Vec<&T> = groups.iter().collect();
    let full = stat(&all);
    let g = groups.len();
    if g < 2 {
        return (full, f64::NAN);
    }
    let leave: Vec<f64> = (0..g)
        .map(|i| {
            let sub: Vec<&T> = groups
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, x)| x)
                .collect();
            stat(&sub)
        })
        .collect();
    let m = leave.iter().sum::<f64>() / g as f64;
    let var = leave.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (g as f64 - 1.0) / g as f64;
    (full, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y);
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_weights_reduce_to_plain_mean() {
        let v = [1.0, 2.0, 6.0];
        let w = weighted_mean(&v, &[-3.0, -3.0, -3.0]);
        assert!((w.mean - 3.0).abs() < 1e-12);
        assert!((w.ess - 3.0).abs() < 1e-12);
    }

    #[test]
    fn jackknife_of_mean_matches_stderr() {
        let v = [1.0, 4.0, 2.0, 8.0, 5.0];
        let s: RunningStats = v.iter().cloned().collect();
        let (m, e) = jackknife(&v, |xs| xs.iter().map(|x| **x).sum::<f64>() / xs.len() as f64);
        assert!((m - s.mean()).abs() < 1e-12);
        assert!((e - s.stderr()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn merge_equals_sequential(a in prop::collection::vec(-1e3f64..1e3, 0..40),
                                   b in prop::collection::vec(-1e3f64..1e3, 0..40)) {
            let mut left: RunningStats = a.iter().cloned().collect();
            let right: RunningStats = b.iter().cloned().collect();
            left.merge(&right);
            let all: RunningStats = a.iter().chain(b.iter()).cloned().collect();
            prop_assert_eq!(left.count(), all.count());
            prop_assert!((left.mean() - all.mean()).abs() < 1e-9);
            prop_assert!((left.variance() - all.variance()).abs() < 1e-6 * (1.0 + all.variance()));
        }
    }
}
