//! Small estimators used by the experiments.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return MeanEstimate { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        MeanEstimate { mean, se, n }
    }

    /// True when `|mean - value| <= z * se`.
    pub fn within(&self, value: f64, z: f64) -> bool {
        (self.mean - value).abs() <= z * self.se
    }
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// A binomial proportion at one parameter value, with a 3-sigma Wilson band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub parameter: f64,
    pub replicates: u64,
    pub successes: u64,
    pub lo: f64,
    pub hi: f64,
}

impl ProportionEstimate {
    pub fn new(parameter: f64, successes: u64, replicates: u64) -> Self {
        let (lo, hi) = wilson_interval(successes, replicates, 3.0);
        ProportionEstimate { parameter, replicates, successes, lo, hi }
    }

    pub fn fraction(&self) -> f64 {
        self.successes as f64 / self.replicates as f64
    }

    pub fn se(&self) -> f64 {
        let p = self.fraction();
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }
}

/// Two-sided exact sign test of `positive` against `negative` outcomes (ties dropped).
pub fn sign_test_p_value(positive: u64, negative: u64) -> f64 {
    let n = positive + negative;
    if n == 0 {
        return 1.0;
    }
    let k = positive.min(negative);
    // log pmf recurrence avoids overflowing binomial coefficients
    let mut log_pmf = n as f64 * 0.5f64.ln();
    let mut tail = log_pmf.exp();
    for j in 0..k {
        log_pmf += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
        tail += log_pmf.exp();
    }
    (2.0 * tail).min(1.0)
}

/// Ordinary least-squares slope of `ys` on `xs`; `None` without spread in `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx).powi(2);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}
