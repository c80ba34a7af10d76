mod common;

use serde_json::Value;

use common::golden::{messages, refreeze, replay, request_stream, responses_path, TRANSCRIPTS};
use common::session::Fixture;

#[test]
fn transcripts_replay_byte_identically() {
    let Some(py) = common::python() else {
        eprintln!("no interpreter; skipping");
        return;
    };
    for name in TRANSCRIPTS {
        let input = request_stream(name);
        let fx = Fixture::new();
        let got = replay(&py, fx.root(), &input);
        assert!(fx.unchanged(), "{name}: workspace modified");
        if refreeze() {
            std::fs::write(responses_path(name), &got).unwrap();
        }
        let want = std::fs::read(responses_path(name)).unwrap();
        assert!(
            got == want,
            "{name}: response transcript differs:\n{}",
            String::from_utf8_lossy(&got)
        );
    }
}

#[test]
fn every_request_gets_one_response() {
    for name in TRANSCRIPTS {
        let responses = messages(&std::fs::read(responses_path(name)).unwrap());
        let mut ids = Vec::new();
        for m in &responses {
            assert_eq!(m["jsonrpc"], "2.0");
            match m.get("id") {
                Some(Value::Number(n)) => ids.push(n.as_i64().unwrap()),
                Some(Value::Null) => assert!(m.get("error").is_some(), "{name}: {m}"),
                Some(other) => panic!("{name}: id {other}"),
                None => {
                    // notifications carry a method and never a result
                    assert!(m["method"].is_string(), "{name}: {m}");
                    assert!(m.get("result").is_none() && m.get("error").is_none());
                }
            }
        }
        let text = std::fs::read_to_string(common::golden::requests_path(name)).unwrap();
        let mut want: Vec<i64> = text
            .lines()
            .filter_map(|l| serde_json::from_str::<Value>(l).ok())
            .filter_map(|v| v.get("id").and_then(Value::as_i64))
            .collect();
        // a repeated id is answered once, with an error, under that id
        assert_eq!(ids.len(), want.len(), "{name}");
        want.sort_unstable();
        ids.sort_unstable();
        assert_eq!(ids, want, "{name}");
    }
}
