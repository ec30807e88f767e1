mod common;

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use common::server::*;
use common::*;
use soundstory::adapters::AudioRef;
use soundstory::platform::AttemptAudio;
use soundstory::session::{SessionEvent, SessionState};
use soundstory::time::StepClock;

fn log_path(data: &Path) -> std::path::PathBuf {
    data.join("sessions").join(GOLDEN_SESSION).join("events.log")
}

fn run_steps(svc: &soundstory::platform::Service, steps: &[Step]) {
    for step in steps {
        match step {
            Step::Say(r) => {
                svc.submit_attempt(GOLDEN_SESSION, AttemptAudio::Ref(AudioRef::new(*r).unwrap()))
                    .unwrap();
            }
            Step::Choose(o) => {
                svc.apply_choice(GOLDEN_SESSION, o).unwrap();
            }
        }
    }
}

/// Stops after every possible step, leaves a torn half-line behind, restarts
/// and finishes. The final log must equal the uninterrupted golden run.
#[test]
fn resume_after_every_step_reproduces_golden_log() {
    let golden = std::fs::read_to_string(golden_log_path()).unwrap();
    for cut in 0..=GOLDEN_SCRIPT.len() {
        let dir = tempfile::tempdir().unwrap();
        let config = stage_data_dir(dir.path());
        let before_crash = {
            let svc = service(&config, Arc::new(StepClock::fixture()));
            let s = svc.create_session(GOLDEN_CHILD, "garden-walk", soundstory::story::Mode::Word).unwrap();
            assert_eq!(s.session_id, GOLDEN_SESSION);
            run_steps(&svc, &GOLDEN_SCRIPT[..cut]);
            svc.session(GOLDEN_SESSION).unwrap()
        };
        let persisted = std::fs::read_to_string(log_path(dir.path())).unwrap();
        let lines = persisted.lines().count() as i64;
        // torn write from the crash
        let mut f = std::fs::OpenOptions::new().append(true).open(log_path(dir.path())).unwrap();
        f.write_all(b"{\"ts\":\"2025-01-01T00:0").unwrap();
        drop(f);

        // every event carries one clock reading
        let clock = StepClock::fixture();
        clock.skip(lines);
        let svc = service(&config, Arc::new(clock));
        assert_eq!(svc.session(GOLDEN_SESSION).unwrap(), before_crash, "cut {cut}");
        run_steps(&svc, &GOLDEN_SCRIPT[cut..]);
        // a torn tail is only cut off by the next append; reads skip it either way
        assert_eq!(svc.session_log(GOLDEN_SESSION).unwrap(), golden, "cut {cut}");
        if cut < GOLDEN_SCRIPT.len() {
            assert_eq!(std::fs::read_to_string(log_path(dir.path())).unwrap(), golden, "cut {cut}");
        }
    }
}

#[test]
fn killed_server_resumes_from_last_event() {
    let dir = tempfile::tempdir().unwrap();
    stage_data_dir(dir.path());
    let cut = 5;

    let server = Server::start(dir.path());
    let created = server.post(
        "/v1/sessions",
        serde_json::json!({"child_id": GOLDEN_CHILD, "story_id": "garden-walk", "mode": "word"}),
    );
    assert_eq!(created["session_id"], GOLDEN_SESSION);
    for step in &GOLDEN_SCRIPT[..cut] {
        server.step(step);
    }
    let state_before = server.get_text(&format!("/v1/sessions/{GOLDEN_SESSION}"));
    let log_before = server.get_text(&format!("/v1/sessions/{GOLDEN_SESSION}/events"));
    server.kill();

    let server = Server::start(dir.path());
    assert_eq!(server.get_text(&format!("/v1/sessions/{GOLDEN_SESSION}")), state_before);
    assert_eq!(server.get_text(&format!("/v1/sessions/{GOLDEN_SESSION}/events")), log_before);
    for step in &GOLDEN_SCRIPT[cut..] {
        server.step(step);
    }
    let log = server.get_text(&format!("/v1/sessions/{GOLDEN_SESSION}/events"));
    server.kill();

    assert!(log.starts_with(&log_before));
    let golden = std::fs::read_to_string(golden_log_path()).unwrap();
    assert_eq!(without_times(&log), without_times(&golden));
    let events: Vec<SessionEvent> = log.lines().map(|l| SessionEvent::from_line(l).unwrap()).collect();
    let state = SessionState::replay(&events).unwrap();
    assert_eq!(state.attempts.len(), 11);
}
