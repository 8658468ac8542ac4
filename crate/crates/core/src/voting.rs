//! Plurality voting.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::rng::RngStream;

/// How a plurality tie is resolved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    /// Uniform over the tied answers, drawn from a trial-level stream.
    SeededUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteTally {
    pub counts: Vec<u64>,
    pub empirical: Vec<f64>,
    /// 1-based; the lowest index attaining the maximum count.
    pub winner: usize,
    pub tie: bool,
}

impl VoteTally {
    /// Answers attaining the maximum count, ascending.
    pub fn leaders(&self) -> Vec<usize> {
        let max = self.counts[self.winner - 1];
        (1..=self.counts.len())
            .filter(|&k| self.counts[k - 1] == max)
            .collect()
    }

    /// Winner under `rule`. `SeededUniform` consumes one draw only on ties.
    pub fn resolve(&self, rule: TieBreak, rng: &mut RngStream) -> usize {
        match rule {
            TieBreak::LowestIndex => self.winner,
            TieBreak::SeededUniform if self.tie => {
                let leaders = self.leaders();
                leaders[rng.below(leaders.len() as u64) as usize]
            }
            TieBreak::SeededUniform => self.winner,
        }
    }

    /// Strict win for `answer`: it is the unique plurality leader.
    pub fn strictly_won_by(&self, answer: usize) -> bool {
        !self.tie && self.winner == answer
    }
}

/// Counts 1-based `responses` over `k` answers and picks the plurality winner.
pub fn tally_and_vote(responses: &[usize], k: usize) -> Result<VoteTally> {
    if responses.is_empty() {
        return param("cannot vote over zero responses");
    }
    let mut counts = vec![0u64; k];
    for &y in responses {
        if y == 0 || y > k {
            return param(format!("response {y} outside 1..={k}"));
        }
        counts[y - 1] += 1;
    }
    Ok(tally_from_counts(counts))
}

pub(crate) fn tally_from_counts(counts: Vec<u64>) -> VoteTally {
    let n: u64 = counts.iter().sum();
    let max = counts.iter().copied().max().unwrap_or(0);
    let winner = counts.iter().position(|&c| c == max).map_or(1, |p| p + 1);
    let tie = counts.iter().filter(|&&c| c == max).count() >= 2;
    let empirical = counts.iter().map(|&c| c as f64 / n as f64).collect();
    VoteTally {
        counts,
        empirical,
        winner,
        tie,
    }
}

/// `Σ_k |p̂_k − p_k|`.
pub fn l1_deviation(empirical: &[f64], truth: &[f64]) -> Result<f64> {
    if empirical.len() != truth.len() {
        return param(format!(
            "dimension mismatch: {} vs {}",
            empirical.len(),
            truth.len()
        ));
    }
    for (name, v) in [("empirical", empirical), ("truth", truth)] {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return param(format!("{name} distribution sums to {s}"));
        }
    }
    Ok(empirical
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).abs())
        .sum())
}
