mod common;

use std::sync::Arc;

use common::*;
use serde_json::Value;
use soundstory::adapters::AudioRef;
use soundstory::session::{EventKind, SessionEvent, SessionState};
use soundstory::time::StepClock;

/// Set SOUNDSTORY_BLESS=1 to rewrite the committed log from the engine run.
fn golden() -> String {
    let engine = engine_golden_log();
    if std::env::var_os("SOUNDSTORY_BLESS").is_some() {
        std::fs::write(golden_log_path(), &engine).unwrap();
    }
    std::fs::read_to_string(golden_log_path()).expect("golden log committed")
}

#[test]
fn engine_run_matches_committed_log() {
    assert_eq!(engine_golden_log(), golden());
}

#[tokio::test(flavor = "multi_thread")]
async fn api_run_is_byte_identical_to_golden() {
    let dir = tempfile::tempdir().unwrap();
    let config = stage_data_dir(dir.path());
    let api = Api::new(service(&config, Arc::new(StepClock::fixture())));
    let log = api.run_golden().await;
    assert_eq!(log, golden());
    let on_disk = std::fs::read_to_string(dir.path().join("sessions").join(GOLDEN_SESSION).join("events.log")).unwrap();
    assert_eq!(on_disk, log);

    // every audio ref named in the log resolves in the store
    let svc = service(&config, Arc::new(StepClock::fixture()));
    let mut refs = 0;
    for line in log.lines() {
        let e = SessionEvent::from_line(line).unwrap();
        for r in [&e.payload["audio_ref"], &e.payload["score"]["audio_ref"]] {
            if let Some(r) = r.as_str() {
                refs += 1;
                assert!(svc.store().has_audio(&AudioRef::new(r).unwrap()), "{r} does not resolve");
            }
        }
    }
    assert_eq!(refs, 11 + 5);
}

#[test]
fn golden_log_covers_every_retry_path() {
    let events: Vec<SessionEvent> = golden().lines().map(|l| SessionEvent::from_line(l).unwrap()).collect();
    let state = SessionState::replay(&events).unwrap();
    // retries used per prompt, in order
    let mut per_prompt: Vec<(String, u8, bool)> = Vec::new();
    for a in &state.attempts {
        let key = format!("{}/{}", a.scene_id, a.turn_id);
        match per_prompt.last_mut() {
            Some(last) if last.0 == key => {
                last.1 = a.retry_index;
                last.2 |= a.proceeded_after_failure;
            }
            _ => per_prompt.push((key, a.retry_index, a.proceeded_after_failure)),
        }
    }
    let shape: Vec<(u8, bool)> = per_prompt.iter().map(|p| (p.1, p.2)).collect();
    assert_eq!(
        shape,
        [(0, false), (1, false), (2, false), (2, true), (0, false), (0, false)]
    );
    assert!(state.attempts.iter().all(|a| a.retry_index <= 2));

    let kinds: Vec<EventKind> = events.iter().map(|e| e.kind).collect();
    assert_eq!(kinds.iter().filter(|k| **k == EventKind::ChoiceMade).count(), 1);
    assert_eq!(kinds.last(), Some(&EventKind::SessionCompleted));
    let cues: Vec<&Value> = events
        .iter()
        .filter(|e| e.kind == EventKind::RetryPrompted)
        .map(|e| &e.payload["feedback"])
        .collect();
    assert_eq!(
        cues,
        ["voice_prompt", "voice_prompt", "transcription_cue", "voice_prompt", "transcription_cue"]
    );
}
