//! The `/v1` HTTP API on a local port, exercised with a blocking client.
//!
//! The `soundstory serve` subcommand runs the same router with graceful
//! shutdown and an idle-session sweeper.

use std::sync::Arc;

use serde_json::{json, Value};
use soundstory::platform::{api, Config, Service};
use soundstory::time::SystemClock;

fn read(mut resp: ureq::http::Response<ureq::Body>) -> Result<(u16, Value), ureq::Error> {
    let status = resp.status().as_u16();
    let text = resp.body_mut().read_to_string()?;
    Ok((status, serde_json::from_str(&text).unwrap_or(Value::String(text))))
}

fn get(url: &str) -> Result<(u16, Value), ureq::Error> {
    read(ureq::get(url).config().http_status_as_error(false).build().call()?)
}

fn post(url: &str, body: Value) -> Result<(u16, Value), ureq::Error> {
    read(
        ureq::post(url)
            .config()
            .http_status_as_error(false)
            .build()
            .header("content-type", "application/json")
            .send(body.to_string())?,
    )
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = tempfile::tempdir()?;
    let config = Config {
        data_dir: data.path().into(),
        ..Config::default()
    };
    let service = Arc::new(Service::open(&config, Arc::new(SystemClock))?);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, api::router(service)).await });

    let audio_dir = data.path().join("audio");
    let report = tokio::task::spawn_blocking(move || -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
        println!("health  {:?}", get(&format!("{base}/v1/health"))?);
        let (_, score) = post(&format!("{base}/v1/score"), json!({"word": "rabbit", "hypothesis_ipa": "wæbɪt"}))?;
        println!("score   {} {}", score["distance"], score["band"]);
        let (_, rec) = get(&format!("{base}/v1/words/recommend?phoneme=l&position=final&count=3"))?;
        println!("words   {}", rec["words"]);

        let (status, story) = post(&format!("{base}/v1/stories/generate"), json!({"target_phonemes": ["r"], "words": ["rabbit", "rain", "red", "rock"], "template_id": "journey", "seed": 2}))?;
        println!("story   {status} {}", story["story_id"]);
        let (status, session) = post(&format!("{base}/v1/sessions"), json!({"child_id": "kid-1", "story_id": story["story_id"], "mode": "word"}))?;
        let sid = session["session_id"].as_str().unwrap_or_default().to_owned();
        println!("session {status} {sid}");

        let (_, turn) = get(&format!("{base}/v1/sessions/{sid}/turn"))?;
        let word = turn["target_words"][0].as_str().unwrap_or_default().to_owned();
        println!("turn    {} / tip: {}", turn["character_line"], turn["parent_tip"]);

        // the stub transcriber reads <ref>.txt and <ref>.ipa next to the clip
        std::fs::write(audio_dir.join("demo-1.txt"), &word)?;
        std::fs::write(audio_dir.join("demo-1.ipa"), "")?;
        let (_, attempt) = post(&format!("{base}/v1/sessions/{sid}/attempts"), json!({"audio_ref": "demo-1"}))?;
        println!("attempt {} {} feedback {}", attempt["outcome"], attempt["score"]["band"], attempt["feedback"]);

        let (status, err) = get(&format!("{base}/v1/sessions/sess-999999"))?;
        println!("missing {status} {err}");
        let (_, dash) = get(&format!("{base}/v1/children/kid-1/dashboard"))?;
        println!("dashboard total {}", dash["total_productions"]);
        Ok(())
    })
    .await?;
    report.map_err(|e| e as Box<dyn std::error::Error>)
}
