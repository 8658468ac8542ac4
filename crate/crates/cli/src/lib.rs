//! `madsim`: configuration, subcommands and result files.
//!
//! Exit status: 0 on success, 1 when a checked property fails, 2 when the run
//! could not happen (bad config, IO, unmet precondition).

pub mod config;
mod error;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mad_core::bounds::{lemma2_holds, margin, theorem1_bound, theorem1a_bound, Bound};
use mad_core::debate::run_debate_trial;
use mad_core::montecarlo::{martingale_trace, run_trials, sweep};
use mad_llm::mock::MockServer;
use mad_llm::{run_llm_debate, HttpChatClient};

pub use config::{load_config, RunConfig};
pub use error::{CliError, Result};
use config::{AxisName, InterventionName, SweepConfig, TopologyName};
use report::OutputDir;

#[derive(Debug, Parser)]
#[command(name = "madsim", version, about = "Bayesian multi-agent debate simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run Monte Carlo trials and write per-round summaries.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the round transcripts of trial 0.
        #[arg(long)]
        transcript: bool,
    },
    /// Check that the mean belief in the correct answer stays flat.
    Martingale {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the majority-vote success bounds, or check the margin lemma.
    Bounds(BoundsArgs),
    /// Run one experiment per value of a swept parameter.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        axis: Option<AxisName>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Run a debate between chat-completion endpoints.
    LlmRun {
        #[command(flatten)]
        common: CommonArgs,
        /// Point every agent at a local deterministic mock server.
        #[arg(long)]
        mock: bool,
    },
}

/// Config file plus flags that override its values.
#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// TOML or JSON config file.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    /// Number of agents N.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Number of answers K.
    #[arg(long)]
    pub answers: Option<usize>,
    /// Debate rounds T after the initial answer.
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub topology: Option<TopologyName>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub hub: Option<usize>,
    /// Comma-separated prior, e.g. `2,1,1,1`.
    #[arg(long, value_delimiter = ',')]
    pub alpha0: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub intervention: Option<InterventionName>,
    #[arg(long)]
    pub follower_prob: Option<f64>,
    #[arg(long)]
    pub correct_index: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Margin Δ between the top two mean beliefs.
    #[arg(long, conflicts_with = "p0", requires = "k")]
    pub delta: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Per-agent accuracy for the binary bound.
    #[arg(long)]
    pub p0: Option<f64>,
    /// Number of agents.
    #[arg(long)]
    pub n: usize,
    /// Mean belief vector for an exhaustive margin-lemma check at `n`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["delta", "p0"])]
    pub theta: Option<Vec<f64>>,
}

impl CommonArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            n: self.agents,
            k: self.answers,
            t: self.rounds,
            trials: self.trials,
            seed: self.seed,
            threads: self.threads,
            topology: self.topology,
            degree: self.degree,
            hub: self.hub,
            alpha0: self.alpha0.clone(),
            intervention: self.intervention,
            follower_prob: self.follower_prob,
            correct_index: self.correct_index,
            output_dir: self.output_dir.clone(),
            ..RunConfig::default()
        }
    }

    /// File values, then flag overrides.
    pub fn load(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        Ok(base.merge(&self.overrides()))
    }
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("madsim: {e}");
            e.exit_code()
        }
    }
}

pub fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Simulate { common, transcript } => simulate(&common.load()?, transcript),
        Command::Martingale { common } => martingale(&common.load()?),
        Command::Bounds(args) => bounds(&args),
        Command::Sweep {
            common,
            axis,
            values,
        } => {
            let mut cfg = common.load()?;
            if let Some(axis) = axis {
                cfg.sweep = Some(SweepConfig {
                    axis,
                    values: values.iter().map(|v| sweep_value(v)).collect(),
                });
            } else if !values.is_empty() {
                return Err(CliError::Config("`--values` needs `--axis`".into()));
            }
            run_sweep(&cfg)
        }
        Command::LlmRun { common, mock } => llm_run(&common.load()?, mock),
    }
}

fn sweep_value(v: &str) -> serde_json::Value {
    v.trim()
        .parse::<u64>()
        .map(Into::into)
        .unwrap_or_else(|_| v.trim().into())
}

/// Resolves the config, echoes it into the output directory, runs `body`, and
/// leaves a failure marker if `body` fails.
fn with_output<F>(cfg: &RunConfig, body: F) -> Result<()>
where
    F: FnOnce(&RunConfig, &OutputDir) -> Result<()>,
{
    let resolved = cfg.resolved()?;
    let out = OutputDir::create(&resolved.output_dir())?;
    let result = out
        .write_json(report::RESOLVED_CONFIG, &resolved)
        .and_then(|_| body(&resolved, &out));
    if let Err(e) = &result {
        out.mark_failed(e);
    }
    result
}

pub fn simulate(cfg: &RunConfig, transcript: bool) -> Result<()> {
    with_output(cfg, |cfg, out| {
        let spec = cfg.experiment()?;
        let summary = run_trials(&spec)?;
        let csv = report::summary_csv(&summary);
        out.write("summary.csv", &csv)?;
        out.write("summary.json", report::summary_json(cfg, &summary)?)?;
        if transcript {
            let rounds = run_debate_trial(&spec.debate, 0)?;
            out.write("transcript.jsonl", report::jsonl(&rounds)?)?;
        }
        print!("{csv}");
        Ok(())
    })
}

pub fn martingale(cfg: &RunConfig) -> Result<()> {
    with_output(cfg, |cfg, out| {
        let trace = martingale_trace(&cfg.experiment()?)?;
        let csv = report::martingale_csv(&trace);
        out.write("martingale.csv", &csv)?;
        out.write_json("martingale.json", &trace)?;
        print!("{csv}");
        if trace.flat {
            println!("flat: mean belief stays within tolerance of p0 = {:.6}", trace.p0);
            Ok(())
        } else {
            let worst = trace
                .mean_belief
                .iter()
                .map(|p| (p - trace.p0).abs())
                .fold(0.0, f64::max);
            Err(CliError::Verification(format!(
                "mean belief drifts from p0 = {:.6} by up to {worst:.6}",
                trace.p0
            )))
        }
    })
}

pub fn run_sweep(cfg: &RunConfig) -> Result<()> {
    let axis = cfg.sweep_axis()?;
    with_output(cfg, |cfg, out| {
        let points = sweep(&cfg.experiment()?, &axis)?;
        let csv = report::sweep_csv(axis.name(), &points);
        out.write("sweep.csv", &csv)?;
        out.write_json("sweep.json", &points)?;
        print!("{csv}");
        Ok(())
    })
}

fn show_bound(bound: &Bound) -> String {
    match bound {
        Bound::Applicable { value } => format!("{value:.7}"),
        Bound::NotApplicable { .. } => "not applicable".into(),
    }
}

pub fn bounds(args: &BoundsArgs) -> Result<()> {
    let n = args.n;
    if let Some(theta) = &args.theta {
        let (_, delta) = margin(theta)?;
        let report = lemma2_holds(theta, n)?;
        println!(
            "margin {delta:.7}: {} tallies checked, {} satisfy the antecedent",
            report.tallies_checked, report.antecedent_hits
        );
        return match report.counterexample {
            None => {
                println!("margin lemma holds at N = {n}");
                Ok(())
            }
            Some(c) => Err(CliError::Verification(format!("counterexample tally {c:?}"))),
        };
    }
    match (args.delta, args.k, args.p0) {
        (Some(delta), Some(k), None) => {
            let bound = theorem1_bound(delta, k, n)?;
            println!("{}", show_bound(&bound));
            let lhs = n as f64 * delta * delta;
            match &bound {
                Bound::Applicable { .. } => {
                    println!("condition: N*delta^2 = {lhs:.6} > K = {k} (satisfied)")
                }
                Bound::NotApplicable { reason } => {
                    println!("condition: N*delta^2 = {lhs:.6} <= K = {k} (not satisfied): {reason}")
                }
            }
            Ok(())
        }
        (None, None, Some(p0)) => {
            let bound = theorem1a_bound(p0, n)?;
            println!("{}", show_bound(&bound));
            match &bound {
                Bound::Applicable { .. } => println!("condition: p0 = {p0} > 0.5 (satisfied)"),
                Bound::NotApplicable { reason } => {
                    println!("condition: p0 = {p0} <= 0.5 (not satisfied): {reason}")
                }
            }
            Ok(())
        }
        _ => Err(CliError::Config(
            "give either `--delta` with `--k`, `--p0`, or `--theta`".into(),
        )),
    }
}

#[derive(serde::Serialize)]
struct LlmResult<'a> {
    voted_answer: Option<&'a str>,
    ground_truth: Option<&'a str>,
    correct: Option<bool>,
    rounds: usize,
}

pub fn llm_run(cfg: &RunConfig, mock: bool) -> Result<()> {
    let mut cfg = cfg.clone();
    let server = if mock {
        let server = MockServer::deterministic()
            .map_err(|e| CliError::Io(format!("starting mock server: {e}")))?;
        if let Some(llm) = cfg.llm.as_mut() {
            if llm.endpoints.is_empty() {
                llm.endpoints.push(config::EndpointConfig {
                    base_url: String::new(),
                    model: "mock".into(),
                    api_key_env: None,
                    system_prompt: None,
                });
            }
            for ep in &mut llm.endpoints {
                ep.base_url = server.base_url();
            }
        }
        Some(server)
    } else {
        None
    };
    let run = cfg.llm_run()?;
    let out = OutputDir::create(&cfg.output_dir())?;
    let result = (|| {
        out.write_json(report::RESOLVED_CONFIG, &cfg)?;
        let outcome = run_llm_debate(&run.debate, &run.endpoints, &HttpChatClient::default());
        match outcome {
            Ok(outcome) => {
                out.write("transcript.jsonl", report::jsonl(&outcome.rounds)?)?;
                let truth = run.debate.ground_truth.as_deref();
                let voted = outcome.voted_answer.as_deref();
                let correct = truth.zip(voted).map(|(g, v)| mad_llm::answer_key(g) == mad_llm::answer_key(v));
                out.write_json(
                    "llm_result.json",
                    &LlmResult {
                        voted_answer: voted,
                        ground_truth: truth,
                        correct,
                        rounds: outcome.rounds.len(),
                    },
                )?;
                println!("voted answer: {}", voted.unwrap_or("(none)"));
                Ok(())
            }
            Err(aborted) => {
                out.write("transcript.jsonl", report::jsonl(&aborted.partial)?)?;
                Err(CliError::Run(aborted.to_string()))
            }
        }
    })();
    if let Err(e) = &result {
        out.mark_failed(e);
    }
    drop(server);
    result
}
