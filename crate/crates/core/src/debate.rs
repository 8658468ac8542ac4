//! Simultaneous-talk debate over DCM agents.
//!
//! Round 0 is initial generation; `n_rounds = T` adds `T` update rounds after
//! it, so `T = 0` is plain majority voting. In round `t >= 1` every unlocked
//! agent counts the round `t-1` answers of its neighbourhood (itself
//! included), adds the counts to its belief, draws a proposal from the DCM
//! pipeline and passes it through the intervention policy.
//!
//! Draw accounting per agent per round: one Dirichlet draw plus one
//! categorical uniform for the proposal (always drawn, whatever the policy),
//! then one extra uniform under `Follower`. Locked agents draw nothing.

use serde::{Deserialize, Serialize};

use crate::belief::{marginal_belief, posterior_update, sample_dcm, BeliefVector, CountVector};
use crate::error::{param, Error, Result};
use crate::rng::RngStream;
use crate::topology::{Topology, TopologyKind};
use crate::voting::tally_and_vote;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Intervention {
    #[default]
    None,
    /// An agent that answers correctly is frozen on that answer.
    Oracle,
    /// An agent whose previous answer matched the previous global majority keeps it.
    Conformist,
    /// With probability `prob` an agent adopts the previous global majority.
    Follower { prob: f64 },
}

impl Intervention {
    pub const DEFAULT_FOLLOWER_PROB: f64 = 0.3;

    pub fn follower() -> Self {
        Self::Follower {
            prob: Self::DEFAULT_FOLLOWER_PROB,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::None => "none".into(),
            Self::Oracle => "oracle".into(),
            Self::Conformist => "conformist".into(),
            Self::Follower { prob } => format!("follower({prob})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DebateConfig {
    pub n_agents: usize,
    pub n_answers: usize,
    pub n_rounds: usize,
    pub topology: TopologyKind,
    pub intervention: Intervention,
    /// Homogeneous initial belief shared by every agent.
    pub alpha0: BeliefVector,
    /// 1-based index of the correct answer.
    pub correct_index: usize,
    pub master_seed: u64,
}

impl DebateConfig {
    /// Fully connected, no intervention, correct answer 1.
    pub fn new(n_agents: usize, alpha0: BeliefVector, n_rounds: usize, master_seed: u64) -> Self {
        Self {
            n_agents,
            n_answers: alpha0.k(),
            n_rounds,
            topology: TopologyKind::FullyConnected,
            intervention: Intervention::None,
            alpha0,
            correct_index: 1,
            master_seed,
        }
    }

    pub fn with_topology(mut self, topology: TopologyKind) -> Self {
        self.topology = topology;
        self
    }

    pub fn with_intervention(mut self, intervention: Intervention) -> Self {
        self.intervention = intervention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return param("need at least one agent");
        }
        if self.n_answers < 2 {
            return param(format!("K must be >= 2, got {}", self.n_answers));
        }
        if self.alpha0.k() != self.n_answers {
            return param(format!(
                "alpha0 has {} entries but K = {}",
                self.alpha0.k(),
                self.n_answers
            ));
        }
        if self.correct_index == 0 || self.correct_index > self.n_answers {
            return param(format!(
                "correct_index {} outside 1..={}",
                self.correct_index, self.n_answers
            ));
        }
        if let Intervention::Follower { prob } = self.intervention {
            if !(0.0..=1.0).contains(&prob) {
                return param(format!("follower probability {prob} outside [0, 1]"));
            }
        }
        Topology::build(self.topology, self.n_agents)?;
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology> {
        Topology::build(self.topology, self.n_agents)
    }
}

#[derive(Clone, Debug)]
pub struct AgentState {
    /// 1-based.
    pub id: usize,
    pub belief: BeliefVector,
    pub last_response: Option<usize>,
    pub locked: bool,
    pub rng: RngStream,
}

impl AgentState {
    /// Probability that this agent's next answer is `correct`: 1 once locked,
    /// otherwise the DCM marginal of its belief.
    pub fn belief_in(&self, correct: usize) -> f64 {
        if self.locked {
            1.0
        } else {
            marginal_belief(&self.belief, correct).unwrap_or(f64::NAN)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round: usize,
    /// 1-based answers in agent order.
    pub responses: Vec<usize>,
    pub beliefs_after: Vec<BeliefVector>,
    /// Lock flags after this round's answers.
    pub locked: Vec<bool>,
    /// Probability each agent's round answer was correct, given the state it
    /// answered from: 1 for agents locked before the round, else `α_c / Σα`.
    pub belief_in_correct: Vec<f64>,
}

/// Fresh agents for trial `trial_id`, each on its own stream.
pub fn init_agents(config: &DebateConfig, trial_id: u32) -> Result<Vec<AgentState>> {
    config.validate()?;
    Ok((1..=config.n_agents)
        .map(|id| AgentState {
            id,
            belief: config.alpha0.clone(),
            last_response: None,
            locked: false,
            rng: RngStream::for_agent(config.master_seed, trial_id, id as u32),
        })
        .collect())
}

/// Applies a majority-based policy to a proposed answer. `Oracle` and `None`
/// pass the proposal through; the oracle lock lives in [`run_round`].
pub fn apply_intervention(
    policy: Intervention,
    last_response: Option<usize>,
    prev_round_majority: usize,
    proposed_response: usize,
    rng: &mut RngStream,
) -> usize {
    match policy {
        Intervention::None | Intervention::Oracle => proposed_response,
        Intervention::Conformist => match last_response {
            Some(prev) if prev == prev_round_majority => prev,
            _ => proposed_response,
        },
        Intervention::Follower { prob } => {
            if rng.bernoulli(prob) {
                prev_round_majority
            } else {
                proposed_response
            }
        }
    }
}

/// Plays round `t` for every agent in parallel (simultaneous talk).
pub fn run_round(
    agents: &mut [AgentState],
    topology: &Topology,
    config: &DebateConfig,
    t: usize,
) -> Result<RoundTranscript> {
    if agents.len() != topology.n_agents() {
        return param(format!(
            "{} agents but topology has {}",
            agents.len(),
            topology.n_agents()
        ));
    }
    let correct = config.correct_index;
    let oracle = config.intervention == Intervention::Oracle;
    let mut belief_in_correct = Vec::with_capacity(agents.len());

    if t == 0 {
        for agent in agents.iter_mut() {
            belief_in_correct.push(agent.belief_in(correct));
            if !agent.locked {
                let y = sample_dcm(&agent.belief, &mut agent.rng);
                agent.last_response = Some(y);
                if oracle && y == correct {
                    agent.locked = true;
                }
            }
        }
        return Ok(snapshot(agents, t, belief_in_correct));
    }

    let prev: Vec<usize> = agents
        .iter()
        .map(|a| {
            a.last_response.ok_or_else(|| {
                Error::ProtocolState(format!(
                    "agent {} has no response before round {t}",
                    a.id
                ))
            })
        })
        .collect::<Result<_>>()?;
    let majority = tally_and_vote(&prev, config.n_answers)?.winner;

    for (agent, hood) in agents.iter_mut().zip(topology.neighbor_sets()) {
        if agent.locked {
            belief_in_correct.push(1.0);
            continue;
        }
        let counts = CountVector::from_responses(hood.iter().map(|&j| prev[j - 1]), config.n_answers)?;
        agent.belief = posterior_update(&agent.belief, &counts)?;
        belief_in_correct.push(marginal_belief(&agent.belief, correct)?);
        let proposed = sample_dcm(&agent.belief, &mut agent.rng);
        let y = apply_intervention(
            config.intervention,
            agent.last_response,
            majority,
            proposed,
            &mut agent.rng,
        );
        agent.last_response = Some(y);
        if oracle && y == correct {
            agent.locked = true;
        }
    }
    Ok(snapshot(agents, t, belief_in_correct))
}

fn snapshot(agents: &[AgentState], round: usize, belief_in_correct: Vec<f64>) -> RoundTranscript {
    RoundTranscript {
        round,
        responses: agents
            .iter()
            .map(|a| a.last_response.unwrap_or_default())
            .collect(),
        beliefs_after: agents.iter().map(|a| a.belief.clone()).collect(),
        locked: agents.iter().map(|a| a.locked).collect(),
        belief_in_correct,
    }
}

/// Rounds `0..=T` of trial 0.
pub fn run_debate(config: &DebateConfig) -> Result<Vec<RoundTranscript>> {
    run_debate_trial(config, 0)
}

/// Rounds `0..=T` of trial `trial_id`.
pub fn run_debate_trial(config: &DebateConfig, trial_id: u32) -> Result<Vec<RoundTranscript>> {
    let topology = config.topology()?;
    let mut agents = init_agents(config, trial_id)?;
    (0..=config.n_rounds)
        .map(|t| run_round(&mut agents, &topology, config, t))
        .collect()
}
