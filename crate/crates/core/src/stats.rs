//! Small estimators shared by the Monte Carlo verifiers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Mean and standard error of the mean, summed in slice order.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Standard error of a Bernoulli rate estimated from `n` trials.
pub fn rate_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

/// Upper `1 - level` quantile of the standard normal, e.g. 2.326 for 0.99.
pub fn z_one_sided(level: f64) -> f64 {
    Normal::standard().inverse_cdf(level)
}

/// Two-sided standard normal critical value, e.g. 2.576 for 0.99.
pub fn z_two_sided(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub method: IntervalMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Normal,
    Wilson,
}

/// Two-sided confidence interval for a Bernoulli rate. Uses the normal
/// approximation unless fewer than 10 successes or failures were seen, in
/// which case the Wilson score interval is used.
pub fn rate_interval(rate: f64, n: usize, level: f64) -> Interval {
    let z = z_two_sided(level);
    let nf = n as f64;
    let successes = rate * nf;
    if successes < 10.0 || nf - successes < 10.0 {
        let z2 = z * z;
        let denom = 1.0 + z2 / nf;
        let centre = (rate + z2 / (2.0 * nf)) / denom;
        let half = z / denom * (rate * (1.0 - rate) / nf + z2 / (4.0 * nf * nf)).sqrt();
        Interval {
            lower: (centre - half).max(0.0),
            upper: (centre + half).min(1.0),
            method: IntervalMethod::Wilson,
        }
    } else {
        let half = z * rate_se(rate, n);
        Interval {
            lower: (rate - half).max(0.0),
            upper: (rate + half).min(1.0),
            method: IntervalMethod::Normal,
        }
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let rx = ranks(x);
    let ry = ranks(y);
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
