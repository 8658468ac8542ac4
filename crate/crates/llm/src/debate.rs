//! The debate protocol over chat-completion agents.
//!
//! Rounds are barriers: every agent's round-`t` prompt is built from round
//! `t-1` texts, the calls of one round run concurrently, and results are
//! assembled in agent order. Answers are compared by [`answer_key`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use mad_core::{Intervention, RngStream, Topology, TopologyKind};

use crate::client::{AgentEndpoint, ChatClient, GenerationParams, Message};
use crate::error::{LlmError, Result};
use crate::extract::{answer_key, extract_final_answer};
use crate::prompt::{build_debate_prompt, AnswerFormat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmDebateConfig {
    pub question: String,
    /// Needed only by the oracle intervention.
    pub ground_truth: Option<String>,
    pub n_agents: usize,
    pub topology: TopologyKind,
    pub n_rounds: usize,
    pub intervention: Intervention,
    pub format: AnswerFormat,
    pub params: GenerationParams,
    /// Seeds the follower coin flips.
    pub seed: u64,
}

impl LlmDebateConfig {
    pub fn new(question: impl Into<String>, n_agents: usize, n_rounds: usize) -> Self {
        Self {
            question: question.into(),
            ground_truth: None,
            n_agents,
            topology: TopologyKind::FullyConnected,
            n_rounds,
            intervention: Intervention::None,
            format: AnswerFormat::default(),
            params: GenerationParams::default(),
            seed: 0,
        }
    }
}

/// How an agent's round answer came about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnSource {
    /// Extracted from a new completion.
    Fresh,
    /// New completion had no usable marker; previous answer carried forward.
    Carried,
    /// Conformist: previous answer matched the previous majority, no call made.
    Retained,
    /// Oracle: agent locked on the ground truth, no call made.
    Locked,
    /// Follower: adopted the previous majority, no call made.
    Adopted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub agent: usize,
    pub model: String,
    pub answer: Option<String>,
    /// The text peers see as this agent's opinion next round.
    pub text: String,
    pub source: TurnSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmRound {
    pub round: usize,
    pub agents: Vec<AgentTurn>,
    pub majority: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LlmDebateOutcome {
    pub rounds: Vec<LlmRound>,
    pub voted_answer: Option<String>,
}

/// A transport failure that ended the debate, with the rounds completed before it.
#[derive(Debug)]
pub struct DebateAborted {
    pub partial: Vec<LlmRound>,
    pub error: LlmError,
}

impl std::fmt::Display for DebateAborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "debate aborted after {} complete round(s): {}",
            self.partial.len(),
            self.error
        )
    }
}

impl std::error::Error for DebateAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<LlmError> for DebateAborted {
    fn from(error: LlmError) -> Self {
        Self {
            partial: Vec::new(),
            error,
        }
    }
}

/// Plurality over present answers; ties go to the answer held by the lowest agent index.
pub fn majority_answer<'a, I>(answers: I) -> Option<String>
where
    I: IntoIterator<Item = Option<&'a str>>,
{
    let mut counts: HashMap<String, (usize, usize, &'a str)> = HashMap::new();
    for (i, a) in answers.into_iter().enumerate() {
        if let Some(a) = a {
            let e = counts.entry(answer_key(a)).or_insert((0, i, a));
            e.0 += 1;
        }
    }
    counts
        .into_values()
        .max_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(&x.1)))
        .map(|(_, _, a)| a.trim().to_string())
}

enum Plan {
    Call(Vec<Message>),
    Reuse(TurnSource, Option<String>, String),
}

/// Runs rounds `0..=T`. `endpoints` are assigned to agents round-robin.
pub fn run_llm_debate(
    config: &LlmDebateConfig,
    endpoints: &[AgentEndpoint],
    client: &dyn ChatClient,
) -> std::result::Result<LlmDebateOutcome, DebateAborted> {
    validate(config, endpoints)?;
    let topology = Topology::build(config.topology, config.n_agents).map_err(LlmError::from)?;
    let truth = config.ground_truth.as_deref().map(answer_key);
    let agent_endpoint = |i: usize| &endpoints[i % endpoints.len()];
    let mut coins: Vec<RngStream> = (1..=config.n_agents)
        .map(|id| RngStream::for_agent(config.seed, 0, id as u32))
        .collect();
    let mut rounds: Vec<LlmRound> = Vec::with_capacity(config.n_rounds + 1);
    let mut locked = vec![false; config.n_agents];

    for t in 0..=config.n_rounds {
        let prev = rounds.last();
        let plans: Vec<Plan> = (0..config.n_agents)
            .map(|i| plan_turn(config, &topology, prev, i, locked[i], &mut coins[i], agent_endpoint(i)))
            .collect::<Result<_>>()
            .map_err(|error| DebateAborted {
                partial: rounds.clone(),
                error,
            })?;

        let replies: Vec<Option<Result<String>>> = std::thread::scope(|s| {
            let handles: Vec<_> = plans
                .iter()
                .enumerate()
                .map(|(i, plan)| match plan {
                    Plan::Call(messages) => {
                        let ep = agent_endpoint(i);
                        Some(s.spawn(move || client.chat_complete(ep, messages, &config.params)))
                    }
                    Plan::Reuse(..) => None,
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.map(|h| h.join().expect("agent call panicked")))
                .collect()
        });

        let mut agents = Vec::with_capacity(config.n_agents);
        for (i, (plan, reply)) in plans.into_iter().zip(replies).enumerate() {
            let model = agent_endpoint(i).model.clone();
            let turn = match (plan, reply) {
                (Plan::Reuse(source, answer, text), _) => AgentTurn {
                    agent: i + 1,
                    model,
                    answer,
                    text,
                    source,
                    extraction_error: None,
                },
                (Plan::Call(_), Some(Ok(raw))) => match extract_final_answer(&raw) {
                    Ok(found) => AgentTurn {
                        agent: i + 1,
                        model,
                        answer: Some(found.answer),
                        text: raw,
                        source: TurnSource::Fresh,
                        extraction_error: None,
                    },
                    Err(e) => {
                        let carried = prev.and_then(|p| p.agents[i].answer.clone());
                        log::warn!(
                            "round {t} agent {}: {e}; carrying forward {carried:?}",
                            i + 1
                        );
                        AgentTurn {
                            agent: i + 1,
                            model,
                            answer: carried,
                            text: raw,
                            source: TurnSource::Carried,
                            extraction_error: Some(e.to_string()),
                        }
                    }
                },
                (Plan::Call(_), Some(Err(error))) => {
                    return Err(DebateAborted {
                        partial: rounds,
                        error,
                    })
                }
                (Plan::Call(_), None) => unreachable!("every call has a reply slot"),
            };
            if let (Some(truth), Some(a)) = (&truth, &turn.answer) {
                if config.intervention == Intervention::Oracle && answer_key(a) == *truth {
                    locked[i] = true;
                }
            }
            agents.push(turn);
        }
        let majority = majority_answer(agents.iter().map(|a| a.answer.as_deref()));
        rounds.push(LlmRound {
            round: t,
            agents,
            majority,
        });
    }
    let voted_answer = rounds.last().and_then(|r| r.majority.clone());
    Ok(LlmDebateOutcome {
        rounds,
        voted_answer,
    })
}

fn validate(config: &LlmDebateConfig, endpoints: &[AgentEndpoint]) -> Result<()> {
    if endpoints.is_empty() {
        return Err(LlmError::Parameter("at least one endpoint is required".into()));
    }
    for ep in endpoints {
        ep.validate()?;
    }
    config.params.validate()?;
    if config.n_agents == 0 {
        return Err(LlmError::Parameter("need at least one agent".into()));
    }
    if config.question.trim().is_empty() {
        return Err(LlmError::Parameter("question is empty".into()));
    }
    match config.intervention {
        Intervention::Oracle if config.ground_truth.is_none() => Err(LlmError::Parameter(
            "the oracle intervention needs a ground truth".into(),
        )),
        Intervention::Follower { prob } if !(0.0..=1.0).contains(&prob) => Err(
            LlmError::Parameter(format!("follower probability {prob} outside [0, 1]")),
        ),
        _ => Ok(()),
    }
}

fn plan_turn(
    config: &LlmDebateConfig,
    topology: &Topology,
    prev: Option<&LlmRound>,
    i: usize,
    locked: bool,
    coin: &mut RngStream,
    endpoint: &AgentEndpoint,
) -> Result<Plan> {
    let mut messages = Vec::with_capacity(2);
    if let Some(persona) = &endpoint.system_prompt {
        messages.push(Message::system(persona.clone()));
    }
    let Some(prev) = prev else {
        messages.push(Message::user(build_debate_prompt(
            &config.question,
            None,
            &[],
            &config.format,
        )?));
        return Ok(Plan::Call(messages));
    };
    let mine = &prev.agents[i];
    if locked {
        return Ok(Plan::Reuse(TurnSource::Locked, mine.answer.clone(), mine.text.clone()));
    }
    if let Some(majority) = &prev.majority {
        let majority_key = answer_key(majority);
        match config.intervention {
            Intervention::Conformist
                if mine.answer.as_deref().map(answer_key).as_ref() == Some(&majority_key) =>
            {
                return Ok(Plan::Reuse(TurnSource::Retained, mine.answer.clone(), mine.text.clone()));
            }
            Intervention::Follower { prob } if coin.bernoulli(prob) => {
                let holder = prev
                    .agents
                    .iter()
                    .find(|a| a.answer.as_deref().map(answer_key).as_ref() == Some(&majority_key))
                    .expect("majority is held by some agent");
                return Ok(Plan::Reuse(
                    TurnSource::Adopted,
                    holder.answer.clone(),
                    holder.text.clone(),
                ));
            }
            _ => {}
        }
    }
    let hood = topology.neighbors(i + 1)?;
    let peers: Vec<&str> = hood
        .iter()
        .filter(|&&j| j != i + 1)
        .map(|&j| prev.agents[j - 1].text.as_str())
        .collect();
    messages.push(Message::user(build_debate_prompt(
        &config.question,
        Some(&mine.text),
        &peers,
        &config.format,
    )?));
    Ok(Plan::Call(messages))
}
