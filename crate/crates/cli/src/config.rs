//! Run configuration: a strict TOML/JSON schema, CLI overrides and resolution
//! into core experiment specs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mad_core::montecarlo::SweepAxis;
use mad_core::{BeliefVector, DebateConfig, ExperimentSpec, Intervention, TieBreak, TopologyKind};
use mad_llm::{AgentEndpoint, AnswerFormat, GenerationParams};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum TopologyName {
    FullyConnected,
    Ring,
    Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum InterventionName {
    None,
    Oracle,
    Conformist,
    Follower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Round 0 only: plain majority voting.
    MajorityVoting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AxisName {
    Agents,
    Rounds,
    Intervention,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: AxisName,
    /// Integers for `agents`/`rounds`, intervention names for `intervention`.
    pub values: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    /// `decimal`, `integer`, `choice`, or a literal example payload.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_format: Option<String>,
    #[serde(default)]
    pub endpoints: Vec<EndpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<GenerationParams>,
}

/// Everything a run can be configured with. Unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hub: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<Vec<f64>>,
    /// Scale for the default `(2,1,...,1)` prior when `alpha0` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention: Option<InterventionName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follower_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<TieBreak>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmConfig>,
}

/// Parses TOML or JSON, chosen by extension (`.json` is JSON, anything else TOML).
pub fn parse_config_str(text: &str, json: bool) -> Result<RunConfig> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_config_str(&text, json).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

macro_rules! take {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Values set in `over` replace those in `self`.
    pub fn merge(mut self, over: &RunConfig) -> RunConfig {
        take!(self, over; n, k, t, topology, degree, hub, alpha0, alpha_scale, trials, seed,
              intervention, follower_prob, correct_index, confidence, tie_break, preset,
              threads, output_dir, sweep, llm);
        self
    }

    fn required<T: Copy>(value: Option<T>, key: &str) -> Result<T> {
        value.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn rounds(&self) -> Result<usize> {
        match (self.preset, self.t) {
            (Some(Preset::MajorityVoting), None | Some(0)) => Ok(0),
            (Some(Preset::MajorityVoting), Some(t)) => Err(CliError::Config(format!(
                "`preset` majority_voting fixes `T` = 0, but `T` = {t}"
            ))),
            (None, t) => Self::required(t, "T"),
        }
    }

    fn alpha0(&self) -> Result<BeliefVector> {
        let alpha = match (&self.alpha0, self.k) {
            (Some(a), k) => {
                if let Some(k) = k.filter(|&k| k != a.len()) {
                    return Err(CliError::Config(format!(
                        "`alpha0` has {} entries but `K` = {k}",
                        a.len()
                    )));
                }
                if self.alpha_scale.is_some() {
                    return Err(CliError::Config(
                        "`alpha_scale` only applies when `alpha0` is absent".into(),
                    ));
                }
                BeliefVector::new(a.clone())
            }
            (None, Some(k)) => BeliefVector::default_shape(k, self.alpha_scale.unwrap_or(1.0)),
            (None, None) => {
                return Err(CliError::Config("one of `alpha0` or `K` is required".into()))
            }
        };
        alpha.map_err(|e| CliError::Config(format!("`alpha0`: {e}")))
    }

    fn topology_kind(&self) -> Result<TopologyKind> {
        let name = self.topology.unwrap_or(TopologyName::FullyConnected);
        let stray = |key: &str| {
            Err(CliError::Config(format!(
                "`{key}` does not apply to topology {name:?}"
            )))
        };
        match name {
            TopologyName::FullyConnected => {
                if self.degree.is_some() {
                    return stray("degree");
                }
                if self.hub.is_some() {
                    return stray("hub");
                }
                Ok(TopologyKind::FullyConnected)
            }
            TopologyName::Ring => {
                if self.hub.is_some() {
                    return stray("hub");
                }
                Ok(TopologyKind::Ring {
                    degree: Self::required(self.degree, "degree")?,
                })
            }
            TopologyName::Star => {
                if self.degree.is_some() {
                    return stray("degree");
                }
                Ok(TopologyKind::Star {
                    hub: self.hub.unwrap_or(1),
                })
            }
        }
    }

    pub fn intervention_policy(&self) -> Result<Intervention> {
        let name = self.intervention.unwrap_or(InterventionName::None);
        if self.follower_prob.is_some() && name != InterventionName::Follower {
            return Err(CliError::Config(
                "`follower_prob` requires `intervention` = follower".into(),
            ));
        }
        Ok(match name {
            InterventionName::None => Intervention::None,
            InterventionName::Oracle => Intervention::Oracle,
            InterventionName::Conformist => Intervention::Conformist,
            InterventionName::Follower => Intervention::Follower {
                prob: self.follower_prob.unwrap_or(Intervention::DEFAULT_FOLLOWER_PROB),
            },
        })
    }

    /// The Monte Carlo experiment described by this config. `seed`, `N`, `T`
    /// (or the preset), `trials` and the prior are mandatory.
    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let alpha0 = self.alpha0()?;
        let debate = DebateConfig {
            n_agents: Self::required(self.n, "N")?,
            n_answers: alpha0.k(),
            n_rounds: self.rounds()?,
            topology: self.topology_kind()?,
            intervention: self.intervention_policy()?,
            alpha0,
            correct_index: self.correct_index.unwrap_or(1),
            master_seed: Self::required(self.seed, "seed")?,
        };
        let mut spec = ExperimentSpec::new(debate, Self::required(self.trials, "trials")?);
        if let Some(c) = self.confidence {
            spec.confidence = c;
        }
        spec.tie_break = self.tie_break.unwrap_or_default();
        spec.threads = self.threads;
        spec.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn sweep_axis(&self) -> Result<SweepAxis> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config("missing required key `sweep`".into()))?;
        let bad = |v: &serde_json::Value| {
            CliError::Config(format!("`sweep.values`: unexpected value {v} for axis {:?}", sweep.axis))
        };
        let ints = || -> Result<Vec<usize>> {
            sweep
                .values
                .iter()
                .map(|v| v.as_u64().map(|x| x as usize).ok_or_else(|| bad(v)))
                .collect()
        };
        let axis = match sweep.axis {
            AxisName::Agents => SweepAxis::Agents(ints()?),
            AxisName::Rounds => SweepAxis::Rounds(ints()?),
            AxisName::Intervention => SweepAxis::Intervention(
                sweep
                    .values
                    .iter()
                    .map(|v| {
                        let name: InterventionName =
                            serde_json::from_value(v.clone()).map_err(|_| bad(v))?;
                        RunConfig {
                            intervention: Some(name),
                            follower_prob: self
                                .follower_prob
                                .filter(|_| name == InterventionName::Follower),
                            ..RunConfig::default()
                        }
                        .intervention_policy()
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        if sweep.values.is_empty() {
            return Err(CliError::Config("`sweep.values` is empty".into()));
        }
        Ok(axis)
    }

    /// The resolved config: defaults made explicit, as echoed into output directories.
    pub fn resolved(&self) -> Result<RunConfig> {
        let spec = self.experiment()?;
        let d = &spec.debate;
        let mut r = self.clone();
        r.n = Some(d.n_agents);
        r.k = Some(d.n_answers);
        r.t = Some(d.n_rounds);
        r.alpha0 = Some(d.alpha0.entries().to_vec());
        r.alpha_scale = None;
        r.topology = Some(self.topology.unwrap_or(TopologyName::FullyConnected));
        if let TopologyKind::Star { hub } = d.topology {
            r.hub = Some(hub);
        }
        r.intervention = Some(self.intervention.unwrap_or(InterventionName::None));
        if let Intervention::Follower { prob } = d.intervention {
            r.follower_prob = Some(prob);
        }
        r.correct_index = Some(d.correct_index);
        r.confidence = Some(spec.confidence);
        r.tie_break = Some(spec.tie_break);
        Ok(r)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Everything `llm-run` needs.
pub struct LlmRun {
    pub debate: mad_llm::LlmDebateConfig,
    pub endpoints: Vec<AgentEndpoint>,
}

impl RunConfig {
    pub fn llm_run(&self) -> Result<LlmRun> {
        let llm = self
            .llm
            .as_ref()
            .ok_or_else(|| CliError::Config("missing required key `llm`".into()))?;
        if llm.endpoints.is_empty() {
            return Err(CliError::Config("`llm.endpoints` is empty".into()));
        }
        let endpoints = llm
            .endpoints
            .iter()
            .map(|e| {
                let mut ep = AgentEndpoint::new(&e.base_url, &e.model)
                    .map_err(|err| CliError::Config(format!("`llm.endpoints`: {err}")))?;
                if let Some(env) = &e.api_key_env {
                    ep.api_key_env = env.clone();
                }
                ep.system_prompt = e.system_prompt.clone();
                Ok(ep)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut debate = mad_llm::LlmDebateConfig::new(
            llm.question.clone(),
            self.n.unwrap_or(endpoints.len()),
            self.rounds()?,
        );
        debate.ground_truth = llm.ground_truth.clone();
        debate.topology = self.topology_kind()?;
        debate.intervention = self.intervention_policy()?;
        debate.format = llm
            .answer_format
            .as_deref()
            .map(AnswerFormat::from_hint)
            .unwrap_or_default();
        debate.params = llm.params.unwrap_or_default();
        debate.seed = self.seed.unwrap_or(0);
        Ok(LlmRun { debate, endpoints })
    }
}
