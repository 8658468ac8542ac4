//! Closed-form majority-vote success bounds and the exhaustive margin predicate.
//!
//! With `θ̄` the mean belief sorted descending and margin `Δ = θ̄₁ − θ̄₂`:
//!
//! * general bound: `P(vote = 1) ≥ 1 − exp(−N (Δ/√K − 1/√N)²)`, valid when `N > K/Δ²`;
//! * binary bound: `P(X̄ > 1/2) ≥ 1 − exp(−2N (p₀ − 1/2)²)`, valid when `p₀ > 1/2`;
//! * margin predicate: `‖p̂ − θ̄‖₁ < Δ` implies answer 1 is the strict plurality winner.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::voting::tally_from_counts;

/// Largest number of tallies [`lemma2_holds`] will enumerate.
pub const ENUMERATION_GUARD: u64 = 1_000_000;

/// Rounding slack for `‖p̂ − θ̄‖₁ < Δ`, applied on the `N`-scaled comparison.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Bound {
    Applicable { value: f64 },
    NotApplicable { reason: String },
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Bound::Applicable { value } => Some(*value),
            Bound::NotApplicable { .. } => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Bound::Applicable { .. })
    }
}

/// Sorted copy of `θ̄` and its margin `Δ = θ̄₁ − θ̄₂`.
pub fn margin(theta_bar: &[f64]) -> Result<(Vec<f64>, f64)> {
    if theta_bar.len() < 2 {
        return param("mean belief needs at least two answers");
    }
    if theta_bar.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return param("mean belief entries must be finite and non-negative");
    }
    let s: f64 = theta_bar.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return param(format!("mean belief sums to {s}, not 1"));
    }
    let mut sorted = theta_bar.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let delta = sorted[0] - sorted[1];
    if delta <= 0.0 {
        return param("mean belief has no strict leader (margin is 0)");
    }
    Ok((sorted, delta))
}

/// `1 − exp(−N (Δ/√K − 1/√N)²)` with no applicability check.
pub fn theorem1_expression(delta: f64, k: usize, n: usize) -> f64 {
    let eps = delta / (k as f64).sqrt() - 1.0 / (n as f64).sqrt();
    1.0 - (-(n as f64) * eps * eps).exp()
}

/// General-K bound; not applicable unless `N > K/Δ²`.
pub fn theorem1_bound(delta: f64, k: usize, n: usize) -> Result<Bound> {
    if !(delta > 0.0 && delta <= 1.0) {
        return param(format!("margin must lie in (0, 1], got {delta}"));
    }
    if k < 2 {
        return param(format!("K must be >= 2, got {k}"));
    }
    if n == 0 {
        return param("N must be >= 1");
    }
    let threshold = k as f64 / (delta * delta);
    // N·Δ² > K, compared without the division
    if (n as f64) * delta * delta <= k as f64 {
        return Ok(Bound::NotApplicable {
            reason: format!("requires N > K/Δ² = {threshold:.6}, got N = {n}"),
        });
    }
    Ok(Bound::Applicable {
        value: theorem1_expression(delta, k, n),
    })
}

/// Binary bound for per-agent accuracy `p0`; not applicable unless `p0 > 1/2`.
pub fn theorem1a_bound(p0: f64, n: usize) -> Result<Bound> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return param(format!("p0 must lie in (0, 1), got {p0}"));
    }
    if n == 0 {
        return param("N must be >= 1");
    }
    if p0 <= 0.5 {
        return Ok(Bound::NotApplicable {
            reason: format!("requires p0 > 1/2, got {p0}"),
        });
    }
    let m = p0 - 0.5;
    Ok(Bound::Applicable {
        value: 1.0 - (-2.0 * n as f64 * m * m).exp(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub margin: f64,
    pub tallies_checked: u64,
    /// Tallies with `‖p̂ − θ̄‖₁ < Δ`.
    pub antecedent_hits: u64,
    /// First tally (over the sorted answers) violating the implication.
    pub counterexample: Option<Vec<u64>>,
}

impl Lemma2Report {
    pub fn holds(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Number of count vectors with `K` parts summing to `N`, saturating.
pub fn tally_count(n: usize, k: usize) -> u64 {
    // C(N + K − 1, K − 1)
    let mut acc: u128 = 1;
    for i in 1..k as u128 {
        acc = acc * (n as u128 + i) / i;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Checks the margin implication on a single tally over the sorted answers.
/// Returns `true` when the implication holds for `counts`.
pub fn lemma2_check_tally(sorted_theta: &[f64], delta: f64, counts: &[u64]) -> bool {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    let scaled_l1: f64 = counts
        .iter()
        .zip(sorted_theta)
        .map(|(&c, &p)| (c as f64 - nf * p).abs())
        .sum();
    if scaled_l1 < nf * delta - BOUNDARY_EPS * nf.max(1.0) {
        let tally = tally_from_counts(counts.to_vec());
        tally.strictly_won_by(1)
    } else {
        true
    }
}

/// Enumerates every tally of `n` votes and checks the margin implication.
pub fn lemma2_holds(theta_bar: &[f64], n: usize) -> Result<Lemma2Report> {
    let (sorted, delta) = margin(theta_bar)?;
    if n == 0 {
        return param("N must be >= 1");
    }
    let k = sorted.len();
    let total = tally_count(n, k);
    if total > ENUMERATION_GUARD {
        return Err(Error::Size(format!(
            "{total} tallies for N={n}, K={k} exceeds the guard of {ENUMERATION_GUARD}"
        )));
    }
    let mut report = Lemma2Report {
        margin: delta,
        tallies_checked: 0,
        antecedent_hits: 0,
        counterexample: None,
    };
    let nf = n as f64;
    for_each_composition(n as u64, k, |counts| {
        report.tallies_checked += 1;
        let scaled_l1: f64 = counts
            .iter()
            .zip(&sorted)
            .map(|(&c, &p)| (c as f64 - nf * p).abs())
            .sum();
        if scaled_l1 < nf * delta - BOUNDARY_EPS * nf {
            report.antecedent_hits += 1;
        }
        if !lemma2_check_tally(&sorted, delta, counts) {
            report.counterexample = Some(counts.to_vec());
            return false;
        }
        true
    });
    Ok(report)
}

/// Visits every `k`-part composition of `n` in lexicographic order until `f` returns false.
pub fn for_each_composition(n: u64, k: usize, mut f: impl FnMut(&[u64]) -> bool) {
    let mut c = vec![0u64; k];
    c[k - 1] = n;
    loop {
        if !f(&c) {
            return;
        }
        // advance: find rightmost position before the last with room to grow
        let mut i = k - 1;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            let rest: u64 = c[i + 1..].iter().sum();
            if rest > 0 {
                c[i] += 1;
                let remaining = rest - 1;
                for x in &mut c[i + 1..] {
                    *x = 0;
                }
                c[k - 1] = remaining;
                break;
            }
        }
    }
}

/// Both bounds for a binary question with per-agent accuracy `p0`, using
/// `Δ = 2p₀ − 1` for the general-K form. Emitted for comparison, not ordered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryComparison {
    pub p0: f64,
    pub n: usize,
    pub general: Bound,
    pub binary: Bound,
}

pub fn compare_binary_bounds(p0: f64, n: usize) -> Result<BinaryComparison> {
    let binary = theorem1a_bound(p0, n)?;
    let delta = 2.0 * p0 - 1.0;
    let general = if delta > 0.0 {
        theorem1_bound(delta, 2, n)?
    } else {
        Bound::NotApplicable {
            reason: "margin 2p0 - 1 is not positive".into(),
        }
    };
    Ok(BinaryComparison {
        p0,
        n,
        general,
        binary,
    })
}
