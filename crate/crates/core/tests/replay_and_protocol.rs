use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;

use etfrp_core::engine::run_episode;
use etfrp_core::envserver::{bind_tcp, serve_listener, ServerConfig};
use etfrp_core::netmodel::fixtures;
use etfrp_core::planners::HeuristicPolicy;
use etfrp_core::trace::{replay, RecordKind, ReplayError, Trace};
use serde_json::Value;

fn heuristic_trace() -> Trace {
    let inst = Arc::new(fixtures::t1());
    run_episode(&inst, &mut HeuristicPolicy, 9, true).unwrap().trace.unwrap()
}

#[test]
fn heuristic_trace_replays_clean_through_jsonl() {
    let trace = heuristic_trace();
    let text = trace.to_jsonl();
    assert!(text.lines().next().unwrap().contains("etfrp-trace/1"));
    let parsed = Trace::from_jsonl(&text).unwrap();
    assert_eq!(parsed.to_jsonl(), text);
    let report = replay(&parsed, Arc::new(fixtures::t1())).unwrap();
    assert!(report.is_clean(), "{:?}", report.divergence);
    assert_eq!(report.records_checked, trace.records.len());
}

#[test]
fn tampered_reward_is_located() {
    let mut trace = heuristic_trace();
    let k = trace.records.iter().rposition(|r| r.event_kind == RecordKind::Decision).unwrap();
    let r = trace.records[k].reward.unwrap();
    trace.records[k].reward = Some(r + 1e-9);
    let report = replay(&trace, Arc::new(fixtures::t1())).unwrap();
    let d = report.divergence.expect("divergence");
    assert_eq!(d.record_index, k);
    assert!(d.detail.contains("reward"), "{}", d.detail);
}

#[test]
fn tampered_draw_is_located() {
    let mut trace = heuristic_trace();
    let k = trace.records.iter().position(|r| !r.random_draws.is_empty()).unwrap();
    trace.records[k].random_draws[0].value += 0.01;
    let report = replay(&trace, Arc::new(fixtures::t1())).unwrap();
    assert!(report.divergence.unwrap().record_index <= k);
}

#[test]
fn wrong_instance_is_a_header_mismatch() {
    let trace = heuristic_trace();
    let mut other = fixtures::t1();
    other.tau[0][1] = 1.1;
    assert!(matches!(replay(&trace, Arc::new(other)), Err(ReplayError::HeaderMismatch { .. })));
}

#[test]
fn tcp_client_drives_an_episode_to_the_end() {
    let listener = bind_tcp("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || serve_listener(listener, Arc::new(ServerConfig::default()), Some(1)));
    let stream = TcpStream::connect(addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let mut ask = |msg: &str| -> Value {
        writeln!(writer, "{msg}").unwrap();
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap()
    };
    let hello = ask(r#"{"type":"hello","id":1,"instance_name":"T1"}"#);
    assert_eq!(hello["fixed_size"], 15);
    let mut msg = ask(r#"{"type":"reset","id":2,"seed":42}"#);
    assert_eq!(msg["active_truck"], 0);
    let mut steps = 0;
    while msg["type"] == "obs" {
        let mask = msg["actions"]["mask"].as_array().unwrap();
        assert!(mask.iter().any(|m| m == 1), "obs without a feasible action");
        let a = mask.iter().position(|m| m == 1).unwrap();
        msg = ask(&format!(r#"{{"type":"step","action":{a}}}"#));
        steps += 1;
        assert!(steps < 100);
    }
    assert_eq!(msg["type"], "episode_end");
    assert_eq!(msg["done"], true);
    assert!(msg["metrics"]["reward_total"].is_number());
    // both halves must close before the server sees end of stream
    drop(writer);
    drop(reader);
    server.join().unwrap().unwrap();
}
