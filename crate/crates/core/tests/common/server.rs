use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

use super::{Step, GOLDEN_SESSION};

/// The real binary running `serve` on a free local port.
pub struct Server {
    child: Child,
    base: String,
}

impl Server {
    pub fn start(data: &Path) -> Server {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let child = Command::new(env!("CARGO_BIN_EXE_soundstory"))
            .args(["--data-dir"])
            .arg(data)
            .args(["serve", "--listen", &format!("127.0.0.1:{port}")])
            .env_remove("SOUNDSTORY_CONFIG")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let base = format!("http://127.0.0.1:{port}");
        let deadline = Instant::now() + Duration::from_secs(20);
        while ureq::get(&format!("{base}/v1/health")).call().is_err() {
            assert!(Instant::now() < deadline, "server did not start");
            std::thread::sleep(Duration::from_millis(50));
        }
        Server { child, base }
    }

    pub fn post(&self, path: &str, body: Value) -> Value {
        let mut resp = ureq::post(&format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .send(body.to_string())
            .unwrap();
        serde_json::from_str(&resp.body_mut().read_to_string().unwrap()).unwrap()
    }

    pub fn get_text(&self, path: &str) -> String {
        ureq::get(&format!("{}{path}", self.base))
            .call()
            .unwrap()
            .body_mut()
            .read_to_string()
            .unwrap()
    }

    pub fn step(&self, step: &Step) {
        match step {
            Step::Say(r) => self.post(
                &format!("/v1/sessions/{GOLDEN_SESSION}/attempts"),
                serde_json::json!({ "audio_ref": r }),
            ),
            Step::Choose(o) => self.post(
                &format!("/v1/sessions/{GOLDEN_SESSION}/choice"),
                serde_json::json!({ "option_id": o }),
            ),
        };
    }

    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Drops timestamps so logs from wall-clock runs compare with the golden log.
pub fn without_times(log: &str) -> Vec<Value> {
    log.lines()
        .map(|l| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("ts");
            if let Some(score) = v["payload"].get_mut("score") {
                score.as_object_mut().unwrap().remove("timestamp");
            }
            v
        })
        .collect()
}

