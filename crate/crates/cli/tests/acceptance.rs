//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout. Exits
//! non-zero when any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use mad_core::belief::{posterior_update, sample_dcm};
use mad_core::bounds::{lemma2_check_tally, lemma2_holds, margin};
use mad_core::montecarlo::{
    martingale_trace, paired_voted_difference, run_trial_records, run_trials, summarize,
    verify_bound, BoundKind,
};
use mad_core::{
    BeliefVector, CountVector, DebateConfig, ExperimentSpec, Intervention, RngStream, TopologyKind,
};
use mad_llm::mock::MockServer;
use mad_llm::{
    extract_final_answer, run_llm_debate, AgentEndpoint, AnswerFormat, HttpChatClient, LlmDebateConfig,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn alpha(v: &[f64]) -> BeliefVector {
    BeliefVector::new(v.to_vec()).unwrap()
}

fn spec(n: usize, a: &[f64], t: usize, seed: u64, trials: usize) -> ExperimentSpec {
    ExperimentSpec::new(DebateConfig::new(n, alpha(a), t, seed), trials)
}

fn dcm_marginal() -> Outcome {
    let a = alpha(&[3.0, 1.0]);
    let draws = 100_000u32;
    let ones = (0..draws)
        .filter(|&i| sample_dcm(&a, &mut RngStream::for_agent(1, i, 1)) == 1)
        .count();
    let freq = ones as f64 / f64::from(draws);
    check((freq - 0.75).abs() <= 0.005, format!("frequency {freq:.5} (target 0.75 ± 0.005)"))
}

fn martingale() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for topo in [TopologyKind::FullyConnected, TopologyKind::Ring { degree: 2 }] {
        let mut s = spec(5, &[2.0, 1.0, 1.0, 1.0], 5, 42, 20_000);
        s.debate.topology = topo;
        let trace = martingale_trace(&s).map_err(|e| e.to_string())?;
        let worst = trace.mean_belief[1..]
            .iter()
            .map(|p| (p - 0.4).abs())
            .fold(0.0, f64::max);
        ok &= worst < 0.01;
        lines.push(format!("{topo:?}: max |p̄_t − 0.4| = {worst:.4}"));
    }
    check(ok, lines.join("; "))
}

fn margin_bound() -> Outcome {
    let cases: [(&[f64], usize); 3] = [
        (&[4.0, 2.0, 2.0, 2.0], 400),
        (&[19.0, 7.0, 7.0, 7.0], 200),
        (&[11.0, 9.0], 600),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (a, n) in cases {
        let r = verify_bound(&spec(n, a, 0, 7, 5_000), BoundKind::Theorem1).map_err(|e| e.to_string())?;
        ok &= r.pass == Some(true);
        lines.push(format!(
            "Δ={:.1},K={},N={n}: rate {:.4} vs bound {:.7}",
            r.parameter,
            a.len(),
            r.empirical_rate.unwrap_or(f64::NAN),
            r.bound.value().unwrap_or(f64::NAN)
        ));
    }
    check(ok, lines.join("; "))
}

fn binary_bound() -> Outcome {
    let r = verify_bound(&spec(200, &[3.0, 2.0], 0, 11, 10_000), BoundKind::Theorem1A)
        .map_err(|e| e.to_string())?;
    let bound = r.bound.value().unwrap_or(f64::NAN);
    check(
        r.pass == Some(true) && (bound - 0.9816844).abs() < 5e-8,
        format!(
            "rate {:.4} (SE {:.4}) vs bound {bound:.7}",
            r.empirical_rate.unwrap_or(f64::NAN),
            r.standard_error.unwrap_or(f64::NAN)
        ),
    )
}

fn multinomial(theta: &[f64], n: u64, rng: &mut RngStream) -> Vec<u64> {
    let mut counts = vec![0u64; theta.len()];
    for _ in 0..n {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut k = theta.len() - 1;
        for (j, p) in theta.iter().enumerate() {
            acc += p;
            if u < acc {
                k = j;
                break;
            }
        }
        counts[k] += 1;
    }
    counts
}

fn margin_lemma() -> Outcome {
    let mut checked = 0u64;
    for (theta, max_n) in [(&[0.7, 0.3][..], 12), (&[0.4, 0.2, 0.2, 0.2][..], 8)] {
        for n in 1..=max_n {
            let r = lemma2_holds(theta, n).map_err(|e| e.to_string())?;
            checked += r.tallies_checked;
            if let Some(c) = r.counterexample {
                return Err(format!("counterexample {c:?} for θ̄={theta:?}, N={n}"));
            }
        }
    }
    let mut rng = RngStream::for_trial(5, 0);
    let (mut spots, mut hits) = (0u32, 0u32);
    while spots < 100_000 {
        let k = 2 + rng.below(4) as usize;
        let raw: Vec<f64> = (0..k).map(|_| rng.uniform_open0()).collect();
        let total: f64 = raw.iter().sum();
        let theta: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let Ok((sorted, delta)) = margin(&theta) else {
            continue;
        };
        let n = 1 + rng.below(50);
        let counts = if rng.bernoulli(0.5) {
            multinomial(&sorted, n, &mut rng)
        } else {
            multinomial(&vec![1.0 / k as f64; k], n, &mut rng)
        };
        let nf = n as f64;
        let l1: f64 = counts.iter().zip(&sorted).map(|(&c, p)| (c as f64 / nf - p).abs()).sum();
        hits += u32::from(l1 < delta);
        if !lemma2_check_tally(&sorted, delta, &counts) {
            return Err(format!("spot counterexample {counts:?} for θ̄={sorted:?}"));
        }
        spots += 1;
    }
    Ok(format!(
        "{checked} enumerated tallies and {spots} spot tallies ({hits} inside the margin), no counterexample"
    ))
}

fn conjugacy() -> Outcome {
    let mut rng = RngStream::for_trial(6, 0);
    for _ in 0..10_000 {
        let k = 2 + rng.below(6) as usize;
        let a: Vec<f64> = (0..k).map(|_| 1e-3 + 50.0 * rng.uniform()).collect();
        let c1: Vec<f64> = (0..k).map(|_| rng.below(20) as f64).collect();
        let c2: Vec<f64> = (0..k).map(|_| rng.below(20) as f64).collect();
        let base = alpha(&a);
        let cv = |c: &[f64]| CountVector::new(c.to_vec()).unwrap();
        let post = posterior_update(&base, &cv(&c1)).map_err(|e| e.to_string())?;
        let expect: Vec<f64> = a.iter().zip(&c1).map(|(x, c)| x + c).collect();
        if post.entries() != expect.as_slice() {
            return Err(format!("α={a:?} c={c1:?}: {:?} ≠ {expect:?}", post.entries()));
        }
        let ab = posterior_update(&post, &cv(&c2)).map_err(|e| e.to_string())?;
        let ba = posterior_update(&posterior_update(&base, &cv(&c2)).unwrap(), &cv(&c1)).unwrap();
        let sum: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| x + y).collect();
        let joint = posterior_update(&base, &cv(&sum)).unwrap();
        let close = |x: &BeliefVector, y: &BeliefVector| {
            x.entries()
                .iter()
                .zip(y.entries())
                .all(|(p, q)| (p - q).abs() <= 4.0 * f64::EPSILON * p.abs().max(q.abs()))
        };
        if !(close(&ab, &ba) && close(&ab, &joint)) {
            return Err(format!("composition differs for α={a:?}"));
        }
    }
    Ok("10000 pairs exact; composition order-independent".into())
}

fn parity_line(a: &[f64]) -> Result<(bool, String), String> {
    let base = spec(5, a, 0, 42, 20_000);
    let mut accs = Vec::new();
    let mut se0 = 0.0;
    for t in [0, 2, 3, 5] {
        let mut s = base.clone();
        s.debate.n_rounds = t;
        let summary = run_trials(&s).map_err(|e| e.to_string())?;
        if t == 0 {
            se0 = summary.se_voted[0];
        }
        accs.push((t, summary.final_voted()));
    }
    let acc0 = accs[0].1;
    let ok = accs.iter().all(|(_, v)| (v - acc0).abs() <= 3.0 * se0);
    let shown: Vec<String> = accs.iter().map(|(t, v)| format!("T={t}: {v:.4}")).collect();
    Ok((ok, format!("{} (3·SE = {:.4})", shown.join(", "), 3.0 * se0)))
}

fn parity() -> Outcome {
    let (ok, line) = parity_line(&[20.0, 10.0, 10.0, 10.0])?;
    let (soft_ok, soft) = parity_line(&[2.0, 1.0, 1.0, 1.0])?;
    check(
        ok,
        format!(
            "α₀=(20,10,10,10): {line}; for reference α₀=(2,1,1,1): {soft} [{}]",
            if soft_ok { "within" } else { "outside" }
        ),
    )
}

fn interventions() -> Outcome {
    let t = 5;
    let base = spec(5, &[2.0, 1.0, 1.0, 1.0], t, 42, 20_000);
    let records = |i: Intervention| {
        let mut s = base.clone();
        s.debate.intervention = i;
        run_trial_records(&s).map_err(|e| e.to_string())
    };
    let vanilla = records(Intervention::None)?;
    let oracle = records(Intervention::Oracle)?;
    let conformist = records(Intervention::Conformist)?;
    let follower = records(Intervention::follower())?;

    let diff = paired_voted_difference(&oracle, &vanilla, t).map_err(|e| e.to_string())?;
    let os = summarize(&oracle);
    let belief_up = os.mean_belief.windows(2).all(|w| w[1] >= w[0]);
    let lock_up = oracle
        .iter()
        .all(|r| r.locked_fraction.windows(2).all(|w| w[1] >= w[0]));
    let vs = summarize(&vanilla);
    let (v, vse) = (vs.final_voted(), vs.se_voted[t]);
    let c = summarize(&conformist).final_voted();
    let f = summarize(&follower).final_voted();
    check(
        diff.z > 2.326 && belief_up && lock_up && c >= v - vse && f >= v - vse,
        format!(
            "oracle−vanilla z = {:.1}; oracle p̄_t non-decreasing: {belief_up}; per-trial lock fraction monotone: {lock_up}; \
             voted@T: vanilla {v:.4}, oracle {:.4}, conformist {c:.4}, follower {f:.4}",
            diff.z,
            os.final_voted()
        ),
    )
}

fn agent_count() -> Outcome {
    let mut pts = Vec::new();
    for n in [1, 3, 5, 9, 15] {
        let s = run_trials(&spec(n, &[3.0, 2.0], 0, 42, 10_000)).map_err(|e| e.to_string())?;
        pts.push((n, s.voted_accuracy[0], s.se_voted[0]));
    }
    let ok = pts
        .windows(2)
        .all(|w| w[1].1 >= w[0].1 - 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    let shown: Vec<String> = pts.iter().map(|(n, a, _)| format!("N={n}: {a:.4}")).collect();
    check(ok, shown.join(", "))
}

#[derive(serde::Deserialize)]
struct Corpus {
    well_formed: Vec<CorpusCase>,
    marker_free: Vec<String>,
}

#[derive(serde::Deserialize)]
struct CorpusCase {
    text: String,
    answer: String,
}

fn extraction() -> Outcome {
    let corpus: Corpus =
        serde_json::from_str(include_str!("../../llm/tests/fixtures/extraction_corpus.json"))
            .map_err(|e| e.to_string())?;
    let good = corpus
        .well_formed
        .iter()
        .filter(|c| extract_final_answer(&c.text).is_ok_and(|x| x.answer == c.answer))
        .count();
    let rejected = corpus
        .marker_free
        .iter()
        .filter(|t| extract_final_answer(t).is_err())
        .count();
    let last = extract_final_answer("{final answer: (A)} on reflection {final answer: (C)}")
        .is_ok_and(|x| x.answer == "(C)");
    let has = |p: &str| corpus.well_formed.iter().any(|c| c.answer == p);
    check(
        good == corpus.well_formed.len()
            && corpus.well_formed.len() >= 30
            && rejected == corpus.marker_free.len()
            && corpus.marker_free.len() >= 10
            && last
            && has("(A)")
            && has("42")
            && has("12.34"),
        format!(
            "{good}/{} extracted, {rejected}/{} marker-free rejected, last-marker rule: {last}",
            corpus.well_formed.len(),
            corpus.marker_free.len()
        ),
    )
}

fn adapter() -> Outcome {
    let run = || -> Result<(String, Vec<serde_json::Value>), String> {
        let server = MockServer::deterministic().map_err(|e| e.to_string())?;
        let eps: Vec<AgentEndpoint> = ["m1", "m2", "m3", "m4", "m5"]
            .iter()
            .map(|m| AgentEndpoint::new(server.base_url(), *m).unwrap())
            .collect();
        let mut cfg = LlmDebateConfig::new("Pick one: (A) (B) (C) (D)", 5, 2);
        cfg.format = AnswerFormat::Choice;
        let out = run_llm_debate(&cfg, &eps, &HttpChatClient::default()).map_err(|e| e.to_string())?;
        let bodies = server
            .requests()
            .iter()
            .map(|r| serde_json::from_str(&r.body).unwrap())
            .collect();
        Ok((serde_json::to_string(&out).unwrap(), bodies))
    };
    let (a, bodies) = run()?;
    let (b, _) = run()?;
    let defaults = bodies
        .iter()
        .all(|b| b["temperature"] == 1.0 && b["top_p"] == 0.9 && b["max_tokens"] == 512);
    check(
        a == b && defaults && bodies.len() == 15,
        format!(
            "transcripts identical: {}; {} requests with temperature 1.0, top_p 0.9, max_tokens 512: {defaults}",
            a == b,
            bodies.len()
        ),
    )
}

fn replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "N = 7\nK = 4\nT = 3\ntopology = \"ring\"\ndegree = 2\nalpha0 = [2.0, 1.0, 1.0, 1.0]\n\
         intervention = \"follower\"\ntrials = 5000\nseed = 2024\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, threads) in [1, 8, 1, 8].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_madsim"))
            .args(["simulate", "-c", cfg.to_str().unwrap(), "--threads", &threads.to_string()])
            .args(["-o", out.to_str().unwrap()])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(fs::read(out.join("summary.csv")).map_err(|e| e.to_string())?);
    }
    check(
        outputs.windows(2).all(|w| w[0] == w[1]),
        format!("4 runs (threads 1, 8, 1, 8), {} CSV bytes each, identical", outputs[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("dcm marginal", Duration::from_secs(5), dcm_marginal),
        ("martingale flatness", Duration::from_secs(60), martingale),
        ("margin bound dominance", Duration::from_secs(60), margin_bound),
        ("binary bound dominance", Duration::from_secs(10), binary_bound),
        ("margin lemma exhaustive", Duration::from_secs(30), margin_lemma),
        ("conjugacy exactness", Duration::from_secs(1), conjugacy),
        ("debate-vote parity", Duration::from_secs(90), parity),
        ("intervention ordering", Duration::from_secs(120), interventions),
        ("agent-count monotonicity", Duration::from_secs(60), agent_count),
        ("extraction protocol", Duration::from_secs(5), extraction),
        ("adapter protocol", Duration::from_secs(30), adapter),
        ("replay", Duration::from_secs(60), replay),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        let took = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if took <= *budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "[{}] {:>2} {name} ({:.2}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
