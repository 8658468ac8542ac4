//! Trial runner and verifiers.
//!
//! Each trial `m` runs a full debate whose agents draw from streams keyed by
//! `(master_seed, m, agent)`. Per-trial records are collected in trial order
//! and reduced sequentially, so the output is bit-identical for any number of
//! worker threads. Every value of a sweep reuses the same master seed, which
//! pairs trial `m` across values.

use serde::{Deserialize, Serialize};

use crate::belief::marginal_belief;
use crate::bounds::{margin, theorem1_bound, theorem1a_bound, Bound};
use crate::debate::{init_agents, run_round, DebateConfig, Intervention};
use crate::error::{param, Error, Result};
use crate::rng::RngStream;
use crate::stats::{mean_se, rate_interval, rate_se, Interval};
use crate::voting::{tally_and_vote, TieBreak};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub debate: DebateConfig,
    pub n_trials: usize,
    /// Two-sided level for reported intervals.
    pub confidence: f64,
    pub tie_break: TieBreak,
    /// Worker threads; `None` uses the ambient pool.
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub const DEFAULT_CONFIDENCE: f64 = 0.99;

    pub fn new(debate: DebateConfig, n_trials: usize) -> Self {
        Self {
            debate,
            n_trials,
            confidence: Self::DEFAULT_CONFIDENCE,
            tie_break: TieBreak::LowestIndex,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.debate.validate()?;
        if self.n_trials == 0 {
            return param("need at least one trial");
        }
        if self.n_trials > u32::MAX as usize {
            return param("trial count exceeds the stream id space");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return param(format!("confidence {} outside (0, 1)", self.confidence));
        }
        if self.threads == Some(0) {
            return param("threads must be >= 1");
        }
        Ok(())
    }
}

/// Per-round outcomes of one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub mean_belief: Vec<f64>,
    /// Fraction of agents answering correctly.
    pub agent_accuracy: Vec<f64>,
    /// Vote under the configured tie rule picked the correct answer.
    pub voted_correct: Vec<bool>,
    /// Correct answer was the unique plurality leader.
    pub strict_win: Vec<bool>,
    /// More than half of the agents answered correctly.
    pub strict_majority: Vec<bool>,
    pub locked_fraction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub n_trials: usize,
    pub mean_belief: Vec<f64>,
    pub mean_agent_accuracy: Vec<f64>,
    pub voted_accuracy: Vec<f64>,
    pub se_belief: Vec<f64>,
    pub se_agent: Vec<f64>,
    pub se_voted: Vec<f64>,
    pub strict_voted_accuracy: Vec<f64>,
    pub strict_majority_rate: Vec<f64>,
}

impl TrialSummary {
    pub fn rounds(&self) -> usize {
        self.mean_belief.len()
    }

    pub fn final_voted(&self) -> f64 {
        *self.voted_accuracy.last().unwrap_or(&f64::NAN)
    }
}

pub fn run_trial(config: &DebateConfig, tie_break: TieBreak, trial_id: u32) -> Result<TrialRecord> {
    let topology = config.topology()?;
    let mut agents = init_agents(config, trial_id)?;
    let mut tie_rng = RngStream::for_trial(config.master_seed, trial_id);
    let rounds = config.n_rounds + 1;
    let n = config.n_agents as f64;
    let correct = config.correct_index;
    let mut rec = TrialRecord {
        mean_belief: Vec::with_capacity(rounds),
        agent_accuracy: Vec::with_capacity(rounds),
        voted_correct: Vec::with_capacity(rounds),
        strict_win: Vec::with_capacity(rounds),
        strict_majority: Vec::with_capacity(rounds),
        locked_fraction: Vec::with_capacity(rounds),
    };
    for t in 0..rounds {
        let round = run_round(&mut agents, &topology, config, t)?;
        let tally = tally_and_vote(&round.responses, config.n_answers)?;
        let n_correct = tally.counts[correct - 1] as f64;
        rec.mean_belief
            .push(round.belief_in_correct.iter().sum::<f64>() / n);
        rec.agent_accuracy.push(n_correct / n);
        rec.voted_correct
            .push(tally.resolve(tie_break, &mut tie_rng) == correct);
        rec.strict_win.push(tally.strictly_won_by(correct));
        rec.strict_majority.push(2.0 * n_correct > n);
        rec.locked_fraction
            .push(round.locked.iter().filter(|&&l| l).count() as f64 / n);
    }
    Ok(rec)
}

/// All trial records, in trial order.
pub fn run_trial_records(spec: &ExperimentSpec) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let job = |m: usize| run_trial(&spec.debate, spec.tie_break, m as u32);
    map_trials(spec.n_trials, spec.threads, job)
}

#[cfg(feature = "parallel")]
fn map_trials<F>(n: usize, threads: Option<usize>, job: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(usize) -> Result<TrialRecord> + Sync,
{
    use rayon::prelude::*;
    match threads {
        Some(1) => (0..n).map(job).collect(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(|| (0..n).into_par_iter().map(&job).collect()),
        None => (0..n).into_par_iter().map(&job).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_trials<F>(n: usize, _threads: Option<usize>, job: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(usize) -> Result<TrialRecord>,
{
    (0..n).map(job).collect()
}

pub fn summarize(records: &[TrialRecord]) -> TrialSummary {
    let rounds = records.first().map_or(0, |r| r.mean_belief.len());
    let m = records.len();
    let mut s = TrialSummary {
        n_trials: m,
        mean_belief: Vec::with_capacity(rounds),
        mean_agent_accuracy: Vec::with_capacity(rounds),
        voted_accuracy: Vec::with_capacity(rounds),
        se_belief: Vec::with_capacity(rounds),
        se_agent: Vec::with_capacity(rounds),
        se_voted: Vec::with_capacity(rounds),
        strict_voted_accuracy: Vec::with_capacity(rounds),
        strict_majority_rate: Vec::with_capacity(rounds),
    };
    let rate = |f: &dyn Fn(&TrialRecord) -> bool| {
        records.iter().filter(|r| f(r)).count() as f64 / m as f64
    };
    for t in 0..rounds {
        let beliefs: Vec<f64> = records.iter().map(|r| r.mean_belief[t]).collect();
        let accs: Vec<f64> = records.iter().map(|r| r.agent_accuracy[t]).collect();
        let (mb, seb) = mean_se(&beliefs);
        let (ma, sea) = mean_se(&accs);
        let voted = rate(&|r| r.voted_correct[t]);
        s.mean_belief.push(mb);
        s.se_belief.push(seb);
        s.mean_agent_accuracy.push(ma);
        s.se_agent.push(sea);
        s.voted_accuracy.push(voted);
        s.se_voted.push(rate_se(voted, m));
        s.strict_voted_accuracy.push(rate(&|r| r.strict_win[t]));
        s.strict_majority_rate.push(rate(&|r| r.strict_majority[t]));
    }
    s
}

pub fn run_trials(spec: &ExperimentSpec) -> Result<TrialSummary> {
    Ok(summarize(&run_trial_records(spec)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleTrace {
    /// `α_c / Σα` of the initial belief.
    pub p0: f64,
    pub mean_belief: Vec<f64>,
    pub se_belief: Vec<f64>,
    /// Allowed `|p̄_t − p₀|` per round: `max(0.01, 4·SE)`.
    pub tolerance: Vec<f64>,
    pub flat: bool,
}

pub const MARTINGALE_ABS_TOL: f64 = 0.01;
pub const MARTINGALE_SE_MULT: f64 = 4.0;

/// Checks that the across-trial mean belief in the correct answer stays at
/// `p₀`. Requires no intervention and a degree-regular topology.
pub fn martingale_trace(spec: &ExperimentSpec) -> Result<MartingaleTrace> {
    spec.validate()?;
    if spec.debate.intervention != Intervention::None {
        return Err(Error::Precondition(format!(
            "intervention {} biases belief updates, so no martingale is expected",
            spec.debate.intervention.label()
        )));
    }
    if !spec.debate.topology()?.is_regular() {
        return Err(Error::Precondition(
            "topology is not degree-regular; the population-level martingale needs equal neighbourhood sizes"
                .into(),
        ));
    }
    let summary = run_trials(spec)?;
    let p0 = marginal_belief(&spec.debate.alpha0, spec.debate.correct_index)?;
    let tolerance: Vec<f64> = summary
        .se_belief
        .iter()
        .map(|se| MARTINGALE_ABS_TOL.max(MARTINGALE_SE_MULT * se))
        .collect();
    let flat = summary
        .mean_belief
        .iter()
        .zip(&tolerance)
        .skip(1)
        .all(|(p, tol)| (p - p0).abs() < *tol);
    Ok(MartingaleTrace {
        p0,
        mean_belief: summary.mean_belief,
        se_belief: summary.se_belief,
        tolerance,
        flat,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// General-K margin bound.
    Theorem1,
    /// Binary per-agent accuracy bound.
    Theorem1A,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub bound: Bound,
    /// Margin for the general bound, per-agent accuracy for the binary one.
    pub parameter: f64,
    pub n_agents: usize,
    pub n_trials: usize,
    pub empirical_rate: Option<f64>,
    pub standard_error: Option<f64>,
    pub interval: Option<Interval>,
    /// `empirical_rate ≥ bound − SE`; `None` when the bound does not apply.
    pub pass: Option<bool>,
}

/// Compares the round-0 voting success rate of `spec` against an analytic bound.
///
/// Success for the general bound is a strict plurality win of the correct
/// answer; for the binary bound it is a strict majority of correct agents.
pub fn verify_bound(spec: &ExperimentSpec, kind: BoundKind) -> Result<BoundReport> {
    spec.validate()?;
    let cfg = &spec.debate;
    let (bound, parameter) = match kind {
        BoundKind::Theorem1 => {
            let mean = cfg.alpha0.mean();
            let (_, delta) = margin(&mean)?;
            let top = mean
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k + 1)
                .unwrap_or(1);
            if top != cfg.correct_index {
                return Err(Error::Precondition(format!(
                    "the correct answer {} is not the mean-belief leader {top}",
                    cfg.correct_index
                )));
            }
            (theorem1_bound(delta, cfg.n_answers, cfg.n_agents)?, delta)
        }
        BoundKind::Theorem1A => {
            let p0 = marginal_belief(&cfg.alpha0, cfg.correct_index)?;
            (theorem1a_bound(p0, cfg.n_agents)?, p0)
        }
    };
    let mut report = BoundReport {
        kind,
        bound: bound.clone(),
        parameter,
        n_agents: cfg.n_agents,
        n_trials: spec.n_trials,
        empirical_rate: None,
        standard_error: None,
        interval: None,
        pass: None,
    };
    let Some(value) = bound.value() else {
        return Ok(report);
    };
    let mut voting = spec.clone();
    voting.debate.n_rounds = 0;
    let summary = run_trials(&voting)?;
    let rate = match kind {
        BoundKind::Theorem1 => summary.strict_voted_accuracy[0],
        BoundKind::Theorem1A => summary.strict_majority_rate[0],
    };
    let se = rate_se(rate, spec.n_trials);
    report.empirical_rate = Some(rate);
    report.standard_error = Some(se);
    report.interval = Some(rate_interval(rate, spec.n_trials, spec.confidence));
    report.pass = Some(rate >= value - se);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    Agents(Vec<usize>),
    Rounds(Vec<usize>),
    Intervention(Vec<Intervention>),
}

impl SweepAxis {
    fn len(&self) -> usize {
        match self {
            Self::Agents(v) => v.len(),
            Self::Rounds(v) => v.len(),
            Self::Intervention(v) => v.len(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Agents(_) => "n_agents",
            Self::Rounds(_) => "n_rounds",
            Self::Intervention(_) => "intervention",
        }
    }

    /// The spec at position `i` plus a label for it.
    pub fn apply(&self, base: &ExperimentSpec, i: usize) -> (String, ExperimentSpec) {
        let mut spec = base.clone();
        let label = match self {
            Self::Agents(v) => {
                spec.debate.n_agents = v[i];
                v[i].to_string()
            }
            Self::Rounds(v) => {
                spec.debate.n_rounds = v[i];
                v[i].to_string()
            }
            Self::Intervention(v) => {
                spec.debate.intervention = v[i];
                v[i].label()
            }
        };
        (label, spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub summary: TrialSummary,
}

/// One summary per axis value, all sharing the base master seed.
pub fn sweep(spec: &ExperimentSpec, axis: &SweepAxis) -> Result<Vec<SweepPoint>> {
    if axis.len() == 0 {
        return param("sweep needs at least one value");
    }
    (0..axis.len())
        .map(|i| {
            let (label, s) = axis.apply(spec, i);
            Ok(SweepPoint {
                label,
                summary: run_trials(&s)?,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub mean: f64,
    pub se: f64,
    /// `mean / se`; infinite when every pair differs in the same direction.
    pub z: f64,
}

/// Per-trial difference `a − b` in voted correctness at `round`.
pub fn paired_voted_difference(
    a: &[TrialRecord],
    b: &[TrialRecord],
    round: usize,
) -> Result<PairedDifference> {
    if a.len() != b.len() || a.is_empty() {
        return param("paired comparison needs equal, non-empty trial sets");
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| f64::from(u8::from(x.voted_correct[round])) - f64::from(u8::from(y.voted_correct[round])))
        .collect();
    let (mean, se) = mean_se(&diffs);
    let z = if se > 0.0 {
        mean / se
    } else if mean > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(PairedDifference { mean, se, z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::BeliefVector;
    use crate::topology::TopologyKind;

    fn spec(alpha: &[f64], n: usize, t: usize, trials: usize) -> ExperimentSpec {
        let cfg = DebateConfig::new(n, BeliefVector::new(alpha.to_vec()).unwrap(), t, 11);
        ExperimentSpec::new(cfg, trials)
    }

    #[test]
    fn summary_shape() {
        let s = run_trials(&spec(&[2.0, 1.0, 1.0], 3, 4, 50)).unwrap();
        assert_eq!(s.rounds(), 5);
        for v in [&s.mean_belief, &s.mean_agent_accuracy, &s.voted_accuracy] {
            assert!(v.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let base = spec(&[2.0, 1.0, 1.0, 1.0], 5, 3, 400);
        let one = run_trials(&base.clone().with_threads(1)).unwrap();
        let four = run_trials(&base.clone().with_threads(4)).unwrap();
        let ambient = run_trials(&base).unwrap();
        assert_eq!(one, four);
        assert_eq!(one, ambient);
    }

    #[test]
    fn martingale_preconditions() {
        let s = spec(&[2.0, 1.0, 1.0, 1.0], 5, 2, 10);
        let mut oracle = s.clone();
        oracle.debate.intervention = Intervention::Oracle;
        assert!(matches!(martingale_trace(&oracle), Err(Error::Precondition(_))));
        let mut star = s.clone();
        star.debate.topology = TopologyKind::Star { hub: 1 };
        assert!(matches!(martingale_trace(&star), Err(Error::Precondition(_))));
        let mut zero = s;
        zero.debate.n_rounds = 0;
        let tr = martingale_trace(&zero).unwrap();
        assert_eq!(tr.mean_belief.len(), 1);
        assert!(tr.flat);
    }

    #[test]
    fn inapplicable_bound_is_reported() {
        let r = verify_bound(&spec(&[4.0, 2.0, 2.0, 2.0], 100, 0, 10), BoundKind::Theorem1).unwrap();
        assert!(!r.bound.is_applicable());
        assert!(r.pass.is_none() && r.empirical_rate.is_none());
    }

    #[test]
    fn empty_sweep_rejected() {
        assert!(sweep(&spec(&[2.0, 1.0], 3, 0, 10), &SweepAxis::Agents(vec![])).is_err());
    }

    #[test]
    fn paired_difference_identical_sets() {
        let recs = run_trial_records(&spec(&[2.0, 1.0], 3, 1, 100)).unwrap();
        let d = paired_voted_difference(&recs, &recs, 1).unwrap();
        assert_eq!((d.mean, d.se, d.z), (0.0, 0.0, 0.0));
    }
}
