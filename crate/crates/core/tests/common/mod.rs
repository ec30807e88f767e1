#![allow(dead_code)]

pub mod server;
pub mod synthetic;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use soundstory::adapters::{AudioRef, StubTranscriber};
use soundstory::lexicon::Lexicon;
use soundstory::platform::{api, Config, Service};
use soundstory::scoring::Scorer;
use soundstory::session::{SessionEngine, SessionEvent, SessionState};
use soundstory::story::{Mode, StoryConfig};
use soundstory::time::{Clock, StepClock};
use tower::ServiceExt;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_story() -> StoryConfig {
    StoryConfig::load(fixtures().join("golden/story.json")).unwrap()
}

pub const GOLDEN_SESSION: &str = "sess-000001";
pub const GOLDEN_CHILD: &str = "kid-01";

#[derive(Debug, Clone, Copy)]
pub enum Step {
    Say(&'static str),
    Choose(&'static str),
}

/// Six prompts: 0 retries, 1 retry, 2 retries, a choice, a flagged
/// proceed, then two clean prompts.
pub const GOLDEN_SCRIPT: &[Step] = &[
    Step::Say("p1-a1"),
    Step::Say("p2-a1"),
    Step::Say("p2-a2"),
    Step::Say("p3-a1"),
    Step::Say("p3-a2"),
    Step::Say("p3-a3"),
    Step::Choose("hop"),
    Step::Say("p4-a1"),
    Step::Say("p4-a2"),
    Step::Say("p4-a3"),
    Step::Say("p5-a1"),
    Step::Say("p6-a1"),
];

pub fn golden_log_path() -> PathBuf {
    fixtures().join("golden/events.log")
}

/// Copies the golden sidecars into `<data>/audio` and saves the golden story.
pub fn stage_data_dir(data: &Path) -> Config {
    let config = Config {
        data_dir: data.to_path_buf(),
        ..Config::default()
    };
    let audio = data.join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    for entry in std::fs::read_dir(fixtures().join("golden/audio")).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), audio.join(entry.file_name())).unwrap();
    }
    let svc = Service::open(&config, Arc::new(StepClock::fixture())).unwrap();
    svc.create_story(golden_story()).unwrap();
    config
}

pub fn service(config: &Config, clock: Arc<dyn Clock>) -> Arc<Service> {
    Arc::new(Service::open(config, clock).unwrap())
}

/// Runs the golden script straight through the engine, without the store or API.
pub fn engine_golden_log() -> String {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    for entry in std::fs::read_dir(fixtures().join("golden/audio")).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), audio.join(entry.file_name())).unwrap();
    }
    let story = golden_story();
    let engine = SessionEngine::new(
        Scorer::bundled(),
        Arc::new(Lexicon::bundled()),
        Arc::new(StepClock::fixture()),
    );
    let stt = StubTranscriber::new(&audio);
    let t = engine
        .start_session(GOLDEN_SESSION, GOLDEN_CHILD, &story, Mode::Word)
        .unwrap();
    let mut events: Vec<SessionEvent> = t.events;
    let mut state = t.state;
    for step in GOLDEN_SCRIPT {
        let t = match step {
            Step::Say(r) => engine.submit_audio(&state, &story, AudioRef::new(*r).unwrap(), &stt).unwrap().0,
            Step::Choose(o) => engine.apply_choice(&state, &story, o).unwrap(),
        };
        events.extend(t.events);
        state = t.state;
    }
    assert_eq!(SessionState::replay(&events).unwrap(), state);
    events.iter().map(|e| e.to_line() + "\n").collect()
}

pub struct Api {
    pub router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!("{e}: {}", String::from_utf8_lossy(&self.body))
        })
    }

    pub fn text(&self) -> String {
        String::from_utf8(self.body.clone()).unwrap()
    }
}

impl Api {
    pub fn new(service: Arc<Service>) -> Api {
        Api {
            router: api::router(service),
        }
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let content_type = resp
            .headers()
            .get("content-type")
            .map(|v| v.to_str().unwrap().to_owned());
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply {
            status,
            content_type,
            body,
        }
    }

    pub async fn get(&self, uri: &str) -> Reply {
        self.send(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    pub async fn post_json(&self, uri: &str, body: &Value) -> Reply {
        self.send(
            Request::post(uri)
                .header("content-type", "application/json")
                .body(Body::from(body.to_string()))
                .unwrap(),
        )
        .await
    }

    /// Multipart upload with a single part.
    pub async fn post_multipart(&self, uri: &str, name: &str, data: &[u8], is_file: bool) -> Reply {
        let boundary = "soundstory-test-boundary";
        let mut body = Vec::new();
        body.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
        if is_file {
            body.extend_from_slice(
                format!(
                    "Content-Disposition: form-data; name=\"{name}\"; filename=\"clip.wav\"\r\nContent-Type: application/octet-stream\r\n\r\n"
                )
                .as_bytes(),
            );
        } else {
            body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n").as_bytes());
        }
        body.extend_from_slice(data);
        body.extend_from_slice(format!("\r\n--{boundary}--\r\n").as_bytes());
        self.send(
            Request::post(uri)
                .header("content-type", format!("multipart/form-data; boundary={boundary}"))
                .body(Body::from(body))
                .unwrap(),
        )
        .await
    }

    /// Runs the golden script through the API and returns the session's log text.
    pub async fn run_golden(&self) -> String {
        let r = self
            .post_json(
                "/v1/sessions",
                &serde_json::json!({"child_id": GOLDEN_CHILD, "story_id": "garden-walk", "mode": "word"}),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let sid = r.json()["session_id"].as_str().unwrap().to_owned();
        assert_eq!(sid, GOLDEN_SESSION);
        for step in GOLDEN_SCRIPT {
            let r = match step {
                Step::Say(a) => {
                    self.post_multipart(&format!("/v1/sessions/{sid}/attempts"), "audio_ref", a.as_bytes(), false)
                        .await
                }
                Step::Choose(o) => {
                    self.post_json(
                        &format!("/v1/sessions/{sid}/choice"),
                        &serde_json::json!({ "option_id": o }),
                    )
                    .await
                }
            };
            assert_eq!(r.status, StatusCode::OK, "{step:?}: {}", r.text());
        }
        self.get(&format!("/v1/sessions/{sid}/events")).await.text()
    }
}

/// Reference distances that must match to the third decimal.
pub const ASR_PAIRS_EXACT: &[(&str, f64)] = &[
    ("rate/gemini", 0.208),
    ("rate/ginic", 1.083),
    ("rate/xlsr", 1.083),
    ("fish/gemini", 0.083),
    ("biscuit/ginic", 0.083),
    ("ojo/ginic", 2.000),
    ("ojo/xlsr", 2.083),
];

/// Reference distances matched within two feature units.
pub const ASR_PAIRS_TOLERANT: &[(&str, f64)] = &[
    ("biscuit/gemini", 1.292),
    ("biscuit/xlsr", 1.5),
    ("fish/ginic", 0.792),
    ("ojo/gemini", 0.125),
];

pub struct OracleValues {
    pub units: Vec<(String, u32)>,
    pub mean: f64,
    pub std: f64,
}

/// Parses an oracle dump: `word<TAB>U/24<TAB>value` rows then `n=.. mean=.. std=..`.
pub fn oracle_values(name: &str) -> OracleValues {
    let text = std::fs::read_to_string(fixtures().join(name)).unwrap();
    let mut units = Vec::new();
    let (mut mean, mut std) = (f64::NAN, f64::NAN);
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("n=") {
            for kv in rest.split_whitespace() {
                match kv.split_once('=') {
                    Some(("mean", v)) => mean = v.parse().unwrap(),
                    Some(("std", v)) => std = v.parse().unwrap(),
                    _ => {}
                }
            }
        } else {
            let cols: Vec<&str> = line.split('\t').collect();
            let u = cols[1].trim_end_matches("/24").parse().unwrap();
            units.push((cols[0].to_owned(), u));
        }
    }
    OracleValues { units, mean, std }
}

pub fn batch_fixture(name: &str) -> soundstory::scoring::BatchReport {
    let file = std::fs::File::open(fixtures().join(name)).unwrap();
    Scorer::bundled().batch_score(&soundstory::scoring::read_batch_csv(file).unwrap())
}
