mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::synthetic::*;
use serde_json::Value;
use soundstory::analytics::{export_report, TimeRange};
use soundstory::phonology::BandThresholds;
use soundstory::platform::Store;
use soundstory::session::SessionEvent;
use soundstory::time::Timestamp;

#[test]
fn aggregation_equals_naive_group_by_on_10k_events() {
    let events = synthetic_log(11);
    assert_eq!(events.len(), 10_000);
    let raw: Vec<Value> = events.iter().map(|e| serde_json::from_str(&e.to_line()).unwrap()).collect();
    let mut spent = check_against_naive(&events, &raw, TimeRange::all());
    let mid = TimeRange {
        from: Some(Timestamp::from_millis(START_MS + 2_000 * 1500)),
        to: Some(Timestamp::from_millis(START_MS + 7_000 * 1500)),
    };
    spent += check_against_naive(&events, &raw, mid);
    assert!(spent.as_secs_f64() < 5.0, "{spent:?}");
}

#[test]
fn export_is_byte_stable_across_sources_and_restarts() {
    let events = synthetic_log(5);
    let dir = tempfile::tempdir().unwrap();
    {
        let store = Store::open(dir.path()).unwrap();
        let mut by_session: BTreeMap<String, Vec<SessionEvent>> = BTreeMap::new();
        for e in &events {
            by_session.entry(e.session_id.clone()).or_default().push(e.clone());
        }
        for (sid, evs) in by_session {
            store.append_events(&sid, &evs).unwrap();
        }
    }
    let t = BandThresholds::default();
    let start = Instant::now();
    let from_memory = export_report("kid-b", TimeRange::all(), &events, &t).unwrap().to_json();
    let store = Store::open(dir.path()).unwrap();
    let first = export_report("kid-b", TimeRange::all(), &store, &t).unwrap().to_json();
    let reopened = Store::open(dir.path()).unwrap();
    let second = export_report("kid-b", TimeRange::all(), &reopened, &t).unwrap().to_json();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(first, second);
    assert_eq!(first, from_memory);
    let parsed: Value = serde_json::from_str(&first).unwrap();
    assert_eq!(parsed["format"], "soundstory-report/1");
    assert_eq!(
        parsed["cards"].as_array().unwrap().len() as u64,
        parsed["summary"]["total_productions"].as_u64().unwrap()
    );
}
