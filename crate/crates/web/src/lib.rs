//! WebAssembly bindings for the demo page in `www/`.
//!
//! Each export takes plain numbers, runs a small experiment and returns JSON
//! for the page to plot. The same functions are callable natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use mad_core::bounds::{theorem1_bound, theorem1a_bound};
use mad_core::montecarlo::run_trials;
use mad_core::{BeliefVector, DebateConfig, ExperimentSpec, Intervention, TopologyKind};

/// Keeps a single click responsive in the browser.
pub const MAX_TRIALS: usize = 20_000;
pub const MAX_AGENTS: usize = 200;
pub const MAX_ROUNDS: usize = 50;

fn topology(name: &str, degree: usize) -> Result<TopologyKind, String> {
    match name {
        "fully_connected" => Ok(TopologyKind::FullyConnected),
        "ring" => Ok(TopologyKind::Ring { degree }),
        "star" => Ok(TopologyKind::Star { hub: 1 }),
        other => Err(format!("unknown topology {other:?}")),
    }
}

fn experiment(
    alpha0: &[f64],
    n_agents: usize,
    n_rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<ExperimentSpec, String> {
    if trials > MAX_TRIALS || n_agents > MAX_AGENTS || n_rounds > MAX_ROUNDS {
        return Err(format!(
            "demo limits: trials <= {MAX_TRIALS}, agents <= {MAX_AGENTS}, rounds <= {MAX_ROUNDS}"
        ));
    }
    let alpha0 = BeliefVector::new(alpha0.to_vec()).map_err(|e| e.to_string())?;
    let mut spec = ExperimentSpec::new(DebateConfig::new(n_agents, alpha0, n_rounds, seed), trials);
    spec.threads = Some(1);
    Ok(spec)
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Trajectory {
    p0: f64,
    mean_belief: Vec<f64>,
    se_belief: Vec<f64>,
    voted_accuracy: Vec<f64>,
    mean_agent_accuracy: Vec<f64>,
}

/// Per-round mean belief in the correct answer and voted accuracy.
pub fn belief_trajectory(
    alpha0: &[f64],
    n_agents: usize,
    topology_name: &str,
    degree: usize,
    n_rounds: usize,
    trials: usize,
    seed: u64,
) -> Result<String, String> {
    let mut spec = experiment(alpha0, n_agents, n_rounds, trials, seed)?;
    spec.debate.topology = topology(topology_name, degree)?;
    let s = run_trials(&spec).map_err(|e| e.to_string())?;
    json(&Trajectory {
        p0: alpha0[0] / alpha0.iter().sum::<f64>(),
        mean_belief: s.mean_belief,
        se_belief: s.se_belief,
        voted_accuracy: s.voted_accuracy,
        mean_agent_accuracy: s.mean_agent_accuracy,
    })
}

#[derive(Serialize)]
struct BoundCurves {
    n: Vec<usize>,
    /// `null` where the margin bound does not apply.
    margin: Vec<Option<f64>>,
    binary: Vec<Option<f64>>,
}

/// Both majority-vote bounds for `N = 1..=n_max`.
pub fn bound_curves(delta: f64, k: usize, p0: f64, n_max: usize) -> Result<String, String> {
    if n_max == 0 || n_max > 100_000 {
        return Err("n_max must be in 1..=100000".into());
    }
    let n: Vec<usize> = (1..=n_max).collect();
    let margin = n
        .iter()
        .map(|&n| theorem1_bound(delta, k, n).map(|b| b.value()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let binary = n
        .iter()
        .map(|&n| theorem1a_bound(p0, n).map(|b| b.value()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    json(&BoundCurves { n, margin, binary })
}

#[derive(Serialize)]
struct InterventionCurve {
    label: String,
    voted_accuracy: Vec<f64>,
    mean_belief: Vec<f64>,
}

/// Voted accuracy and mean belief per round under each intervention, on
/// common seeds.
pub fn intervention_curves(
    alpha0: &[f64],
    n_agents: usize,
    n_rounds: usize,
    trials: usize,
    seed: u64,
    follower_prob: f64,
) -> Result<String, String> {
    let base = experiment(alpha0, n_agents, n_rounds, trials, seed)?;
    let policies = [
        Intervention::None,
        Intervention::Oracle,
        Intervention::Conformist,
        Intervention::Follower { prob: follower_prob },
    ];
    let curves = policies
        .iter()
        .map(|&p| {
            let mut spec = base.clone();
            spec.debate.intervention = p;
            let s = run_trials(&spec).map_err(|e| e.to_string())?;
            Ok(InterventionCurve {
                label: p.label(),
                voted_accuracy: s.voted_accuracy,
                mean_belief: s.mean_belief,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    json(&curves)
}

#[wasm_bindgen(js_name = beliefTrajectory)]
pub fn belief_trajectory_js(
    alpha0: &[f64],
    n_agents: usize,
    topology_name: &str,
    degree: usize,
    n_rounds: usize,
    trials: usize,
    seed: u32,
) -> Result<String, JsError> {
    belief_trajectory(alpha0, n_agents, topology_name, degree, n_rounds, trials, u64::from(seed))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = boundCurves)]
pub fn bound_curves_js(delta: f64, k: usize, p0: f64, n_max: usize) -> Result<String, JsError> {
    bound_curves(delta, k, p0, n_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = interventionCurves)]
pub fn intervention_curves_js(
    alpha0: &[f64],
    n_agents: usize,
    n_rounds: usize,
    trials: usize,
    seed: u32,
    follower_prob: f64,
) -> Result<String, JsError> {
    intervention_curves(alpha0, n_agents, n_rounds, trials, u64::from(seed), follower_prob)
        .map_err(|e| JsError::new(&e))
}
