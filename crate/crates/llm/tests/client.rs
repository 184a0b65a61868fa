use std::fs;

use symlaw_core::expr::Structure;
use symlaw_core::metrics::RubricScores;
use symlaw_core::TaskKind;
use symlaw_llm::{
    judge, parse_candidate, ChatClient, ChatModel, JudgeInput, LlmError, Message, MockReply, MockServer,
    ModelConfig, Shape,
};

fn client(server: &MockServer) -> ChatClient {
    ChatClient::new(ModelConfig {
        base_url: server.base_url(),
        model: "mock".into(),
        backoff_ms: 1,
        max_backoff_ms: 4,
        api_key_env: "SYMLAW_TEST_NO_SUCH_KEY".into(),
        ..ModelConfig::default()
    })
    .unwrap()
}

fn hello() -> Vec<Message> {
    vec![Message::system("be brief"), Message::user("hello")]
}

#[test]
fn echoes_request_fields() {
    let server = MockServer::start(|req, _| MockReply::ok(format!("you said {}", req.user_text()))).unwrap();
    let c = client(&server);
    let out = c.complete(&hello(), 0.3, 5).unwrap();
    assert_eq!(out.text, "you said hello");
    assert_eq!(out.attempts, 1);
    let seen = server.requests();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].model, "mock");
    assert_eq!(seen[0].temperature, 0.3);
    assert_eq!(seen[0].system_text(), "be brief");
}

#[test]
fn transient_failures_are_retried() {
    let server =
        MockServer::scripted(vec![MockReply::status(500), MockReply::status(429), MockReply::ok("fine")]).unwrap();
    let c = client(&server);
    let out = c.complete(&hello(), 0.7, 5).unwrap();
    assert_eq!(out.attempts, 3);
    assert_eq!(server.request_count(), 3);
    assert_eq!(c.requests(), 3);
}

#[test]
fn attempt_cap_is_respected() {
    let server = MockServer::scripted(vec![MockReply::status(503)]).unwrap();
    let c = client(&server);
    match c.complete(&hello(), 0.7, 4) {
        Err(LlmError::Exhausted { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.request_count(), 4);
}

#[test]
fn empty_completion_counts_as_transient() {
    let server = MockServer::scripted(vec![MockReply::ok("  "), MockReply::ok("done")]).unwrap();
    let out = client(&server).complete(&hello(), 0.7, 3).unwrap();
    assert_eq!((out.text.as_str(), out.attempts), ("done", 2));
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::scripted(vec![MockReply::status(401)]).unwrap();
    let c = client(&server);
    assert!(matches!(
        c.complete(&hello(), 0.7, 10),
        Err(LlmError::Rejected { status: 401, .. })
    ));
    assert_eq!(server.request_count(), 1);
}

#[test]
fn transcript_has_one_line_per_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcript.jsonl");
    let server = MockServer::scripted(vec![MockReply::status(500), MockReply::ok("ok")]).unwrap();
    let c = client(&server).with_transcript(&path).unwrap();
    c.complete(&hello(), 0.7, 3).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].get("error").is_some());
    assert_eq!(lines[1]["reply"], "ok");
    assert_eq!(lines[1]["attempt"], 2);
}

#[test]
fn proposal_reply_round_trip() {
    let server = MockServer::scripted(vec![MockReply::ok(
        "Susceptible individuals decline.\n{\"eq\": \"-c*x_0*x_1 | c*x_0*x_1 - c*x_1\", \"dim\": 2}",
    )])
    .unwrap();
    let out = client(&server).complete(&hello(), 0.7, 2).unwrap();
    let shape = Shape {
        task: TaskKind::Cde,
        dim: 2,
        max_lag: 1,
    };
    let parsed = parse_candidate(&out.text, shape).unwrap();
    assert_eq!(parsed.reasoning.as_deref(), Some("Susceptible individuals decline."));
    assert!(matches!(parsed.structure, Structure::Cde(_)));
}

#[test]
fn judge_scores_round_trip_and_clamp() {
    let expected = RubricScores::new(5, 4, 4, 4).unwrap();
    let server = MockServer::scripted(vec![
        MockReply::ok("I cannot score this."),
        MockReply::ok(serde_json::to_string(&expected).unwrap()),
        MockReply::ok(
            r#"{"context_alignment": "6", "scientific_plausibility": 4, "conciseness_clarity": 4, "logical_coherence": 4}"#,
        ),
    ])
    .unwrap();
    let c = client(&server);
    let cand = Structure::Cde(symlaw_core::expr::AlgebraicSystem::parse("c*x_0", 1).unwrap());
    let input = JudgeInput {
        candidate: &cand,
        reasoning: None,
        context: None,
        series: "t, x_0\n0, 1",
    };
    let (v, used) = judge(&c, &input, 0.0, 5).unwrap();
    let v = v.unwrap();
    assert_eq!((v.scores, v.clamped, used), (expected, false, 2));
    assert_eq!(server.requests()[0].temperature, 0.0);

    let (v, used) = judge(&c, &input, 0.0, 5).unwrap();
    let v = v.unwrap();
    assert_eq!((v.scores, v.clamped, used), (expected, true, 1));
}

#[test]
fn judge_gives_up_within_budget() {
    let server = MockServer::scripted(vec![MockReply::ok("no scores")]).unwrap();
    let c = client(&server);
    let cand = Structure::Cde(symlaw_core::expr::AlgebraicSystem::parse("c*x_0", 1).unwrap());
    let input = JudgeInput {
        candidate: &cand,
        reasoning: Some("growth"),
        context: None,
        series: "",
    };
    let (v, used) = judge(&c, &input, 0.0, 3).unwrap();
    assert_eq!((v, used), (None, 3));
    assert_eq!(server.request_count(), 3);
}
