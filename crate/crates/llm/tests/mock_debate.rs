use std::collections::HashMap;
use std::time::Duration;

use mad_core::{Intervention, TopologyKind};
use mad_llm::mock::MockServer;
use mad_llm::{
    run_llm_debate, AgentEndpoint, AnswerFormat, ChatClient, GenerationParams, HttpChatClient,
    LlmDebateConfig, LlmError, Message, RetryPolicy, TurnSource,
};

fn fast_client() -> HttpChatClient {
    HttpChatClient::new(
        Duration::from_secs(10),
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::ZERO,
        },
    )
}

fn endpoints(server: &MockServer, models: &[&str]) -> Vec<AgentEndpoint> {
    models
        .iter()
        .map(|m| AgentEndpoint::new(server.base_url(), *m).unwrap())
        .collect()
}

fn choice_config(n: usize, t: usize) -> LlmDebateConfig {
    let mut c = LlmDebateConfig::new("Which option is correct? (A) 1 (B) 2 (C) 3 (D) 4", n, t);
    c.format = AnswerFormat::Choice;
    c
}

#[test]
fn echo_round_trip() {
    let server = MockServer::echo("ok {final answer: 42}").unwrap();
    let ep = AgentEndpoint::new(server.base_url(), "m").unwrap();
    let text = fast_client()
        .chat_complete(&ep, &[Message::user("hi")], &GenerationParams::default())
        .unwrap();
    assert_eq!(text, "ok {final answer: 42}");
    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].method, "POST");
    assert_eq!(reqs[0].path, "/v1/chat/completions");
}

#[test]
fn server_errors_exhaust_retries() {
    let server = MockServer::failing(500).unwrap();
    let ep = AgentEndpoint::new(server.base_url(), "m").unwrap();
    let err = fast_client()
        .chat_complete(&ep, &[Message::user("hi")], &GenerationParams::default())
        .unwrap_err();
    assert!(matches!(err, LlmError::Status { status: 500, .. }), "{err}");
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::failing(400).unwrap();
    let ep = AgentEndpoint::new(server.base_url(), "m").unwrap();
    assert!(fast_client()
        .chat_complete(&ep, &[Message::user("hi")], &GenerationParams::default())
        .is_err());
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn default_params_are_sent() {
    let server = MockServer::echo("{final answer: 1}").unwrap();
    let ep = AgentEndpoint::new(server.base_url(), "m").unwrap();
    fast_client()
        .chat_complete(&ep, &[Message::user("hi")], &GenerationParams::default())
        .unwrap();
    let body: serde_json::Value = serde_json::from_str(&server.requests()[0].body).unwrap();
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["top_p"], 0.9);
    assert_eq!(body["max_tokens"], 512);
    assert_eq!(body["model"], "m");
}

fn script(entries: &[(&str, &[&str])]) -> HashMap<String, Vec<String>> {
    entries
        .iter()
        .map(|(m, lines)| (m.to_string(), lines.iter().map(|l| l.to_string()).collect()))
        .collect()
}

#[test]
fn zero_rounds_is_majority_vote() {
    let server = MockServer::scripted(script(&[
        ("a1", &["{final answer: (A)}"]),
        ("a2", &["{final answer: (A)}"]),
        ("a3", &["{final answer: (B)}"]),
        ("a4", &["{final answer: (C)}"]),
        ("a5", &["{final answer: (A)}"]),
    ]))
    .unwrap();
    let eps = endpoints(&server, &["a1", "a2", "a3", "a4", "a5"]);
    let out = run_llm_debate(&choice_config(5, 0), &eps, &fast_client()).unwrap();
    assert_eq!(out.rounds.len(), 1);
    assert_eq!(out.voted_answer.as_deref(), Some("(A)"));
    assert_eq!(server.requests().len(), 5);
}

#[test]
fn conformist_in_majority_makes_no_call() {
    let server = MockServer::scripted(script(&[
        ("a1", &["{final answer: (A)}", "{final answer: (B)}"]),
        ("a2", &["{final answer: (A)}", "{final answer: (B)}"]),
        ("a3", &["{final answer: (B)}", "{final answer: (A)}"]),
    ]))
    .unwrap();
    let eps = endpoints(&server, &["a1", "a2", "a3"]);
    let mut cfg = choice_config(3, 1);
    cfg.intervention = Intervention::Conformist;
    let out = run_llm_debate(&cfg, &eps, &fast_client()).unwrap();
    let r1 = &out.rounds[1].agents;
    assert_eq!(r1[0].source, TurnSource::Retained);
    assert_eq!(r1[0].answer.as_deref(), Some("(A)"));
    assert_eq!(r1[1].source, TurnSource::Retained);
    assert_eq!(r1[2].source, TurnSource::Fresh);
    assert_eq!(r1[2].answer.as_deref(), Some("(A)"));
    assert_eq!(server.requests().len(), 4);
}

#[test]
fn oracle_locks_on_ground_truth() {
    let server = MockServer::scripted(script(&[
        ("a1", &["{final answer: (B)}", "{final answer: (C)}"]),
        ("a2", &["{final answer: (C)}", "{final answer: (B)}", "{final answer: (D)}"]),
    ]))
    .unwrap();
    let eps = endpoints(&server, &["a1", "a2"]);
    let mut cfg = choice_config(2, 2);
    cfg.intervention = Intervention::Oracle;
    cfg.ground_truth = Some("(b)".into());
    let out = run_llm_debate(&cfg, &eps, &fast_client()).unwrap();
    for r in &out.rounds {
        assert_eq!(r.agents[0].answer.as_deref(), Some("(B)"));
    }
    assert_eq!(out.rounds[2].agents[0].source, TurnSource::Locked);
    assert_eq!(out.rounds[2].agents[1].source, TurnSource::Locked);
    // a1 once, a2 twice
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn oracle_requires_ground_truth() {
    let server = MockServer::echo("{final answer: (A)}").unwrap();
    let mut cfg = choice_config(2, 1);
    cfg.intervention = Intervention::Oracle;
    let err = run_llm_debate(&cfg, &endpoints(&server, &["m"]), &fast_client()).unwrap_err();
    assert!(matches!(err.error, LlmError::Parameter(_)));
    assert!(server.requests().is_empty());
}

#[test]
fn missing_marker_carries_previous_answer() {
    let server = MockServer::scripted(script(&[(
        "a1",
        &["{final answer: (C)}", "I would rather not say."],
    )]))
    .unwrap();
    let out = run_llm_debate(&choice_config(1, 2), &endpoints(&server, &["a1"]), &fast_client()).unwrap();
    for r in &out.rounds[1..] {
        let a = &r.agents[0];
        assert_eq!(a.source, TurnSource::Carried);
        assert_eq!(a.answer.as_deref(), Some("(C)"));
        assert!(a.extraction_error.is_some());
    }
}

#[test]
fn transport_failure_returns_partial_transcript() {
    let server = MockServer::scripted(script(&[("a1", &["{final answer: (A)}"])])).unwrap();
    let mut eps = endpoints(&server, &["a1"]);
    let out = run_llm_debate(&choice_config(2, 1), &eps, &fast_client()).unwrap();
    assert_eq!(out.rounds.len(), 2);
    eps.push(AgentEndpoint::new(server.base_url(), "unknown").unwrap());
    let err = run_llm_debate(&choice_config(2, 1), &eps, &fast_client()).unwrap_err();
    assert!(matches!(err.error, LlmError::Status { status: 404, .. }));
    assert!(err.partial.is_empty());
}

#[test]
fn peers_follow_topology() {
    let server = MockServer::deterministic().unwrap();
    let eps = endpoints(&server, &["m1", "m2", "m3", "m4", "m5"]);
    let mut cfg = choice_config(5, 1);
    cfg.topology = TopologyKind::Ring { degree: 2 };
    let out = run_llm_debate(&cfg, &eps, &fast_client()).unwrap();
    let reqs = server.requests();
    assert_eq!(reqs.len(), 10);
    let texts: Vec<&str> = out.rounds[0].agents.iter().map(|a| a.text.as_str()).collect();
    let own = format!("{}\n{}", mad_llm::prompt::OWN_PREFIX, texts[0]);
    let p1 = reqs
        .iter()
        .map(|r| r.chat().unwrap().messages.last().unwrap().content.clone())
        .find(|p| p.contains(&own))
        .expect("agent 1 revision prompt");
    assert!(p1.contains(texts[1]) && p1.contains(texts[4]));
    assert!(!p1.contains(texts[2]) && !p1.contains(texts[3]));
    assert!(p1.find(texts[1]) < p1.find(texts[4]));
}

#[test]
fn deterministic_mock_gives_identical_transcripts() {
    let run = || {
        let server = MockServer::deterministic().unwrap();
        let eps = endpoints(&server, &["alpha", "beta", "gamma"]);
        let out = run_llm_debate(&choice_config(5, 2), &eps, &fast_client()).unwrap();
        serde_json::to_string(&out).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn persona_goes_in_system_message() {
    let server = MockServer::echo("{final answer: 1}").unwrap();
    let eps = vec![AgentEndpoint::new(server.base_url(), "m").unwrap().with_persona("You are terse.")];
    run_llm_debate(&LlmDebateConfig::new("1?", 1, 0), &eps, &fast_client()).unwrap();
    let chat = server.requests()[0].chat().unwrap();
    assert_eq!(chat.messages.len(), 2);
    assert_eq!(chat.messages[0].content, "You are terse.");
}
