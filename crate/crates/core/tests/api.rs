mod common;

use std::sync::Arc;

use axum::http::StatusCode;
use common::*;
use serde_json::{json, Value};
use soundstory::adapters::AudioRef;
use soundstory::analytics::{aggregate_child, export_report, recording_cards, CardFilter, TimeRange};
use soundstory::phonology::{BandThresholds, QualityBand};
use soundstory::time::StepClock;

fn fresh() -> (tempfile::TempDir, Api, Arc<soundstory::platform::Service>) {
    let dir = tempfile::tempdir().unwrap();
    let config = stage_data_dir(dir.path());
    let svc = service(&config, Arc::new(StepClock::fixture()));
    (dir, Api::new(Arc::clone(&svc)), svc)
}

fn assert_error(r: &Reply, status: StatusCode, code: &str) {
    assert_eq!(r.status, status, "{}", r.text());
    let body = r.json();
    assert_eq!(body["code"], code, "{body}");
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()));
}

async fn start(api: &Api) -> String {
    let r = api
        .post_json(
            "/v1/sessions",
            &json!({"child_id": GOLDEN_CHILD, "story_id": "garden-walk", "mode": "word"}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    r.json()["session_id"].as_str().unwrap().to_owned()
}

async fn say(api: &Api, sid: &str, clip: &str) -> Reply {
    api.post_multipart(&format!("/v1/sessions/{sid}/attempts"), "audio_ref", clip.as_bytes(), false)
        .await
}

#[tokio::test]
async fn unknown_story_is_404() {
    let (_d, api, _) = fresh();
    let r = api
        .post_json("/v1/sessions", &json!({"child_id": "kid", "story_id": "nope", "mode": "word"}))
        .await;
    assert_error(&r, StatusCode::NOT_FOUND, "StoryNotFound");
    assert_error(&api.get("/v1/stories/nope").await, StatusCode::NOT_FOUND, "StoryNotFound");
    assert_error(&api.get("/v1/sessions/sess-999999/turn").await, StatusCode::NOT_FOUND, "SessionNotFound");
}

#[tokio::test]
async fn malformed_requests_are_structured_400s() {
    let (_d, api, _) = fresh();
    let r = api.post_json("/v1/sessions", &json!({"child_id": "kid"})).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "BadRequest");
    let r = api.post_json("/v1/sessions", &json!({"child_id": "../x", "story_id": "garden-walk", "mode": "word"})).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "InvalidId");
    let r = api.get("/v1/words/recommend?phoneme=r&count=lots").await;
    assert_error(&r, StatusCode::BAD_REQUEST, "BadRequest");
    let sid = start(&api).await;
    let r = api.post_multipart(&format!("/v1/sessions/{sid}/attempts"), "other", b"x", false).await;
    assert_error(&r, StatusCode::BAD_REQUEST, "BadRequest");
    let r = say(&api, &sid, "no-such-clip").await;
    assert_error(&r, StatusCode::NOT_FOUND, "AudioNotFound");
}

#[tokio::test]
async fn stories_create_validate_list_generate() {
    let (_d, api, _) = fresh();
    let mut story = serde_json::to_value(golden_story()).unwrap();
    story["story_id"] = json!("broken");
    story["scenes"][0]["turns"][0]["bombardment_count"] = json!(9);
    let r = api.post_json("/v1/stories/validate", &story).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["valid"], false);
    assert_eq!(r.json()["violations"][0]["kind"], "bombardment_mismatch");
    let r = api.post_json("/v1/stories", &story).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "InvalidStory");
    assert_eq!(r.json()["violations"].as_array().unwrap().len(), 1);

    let r = api
        .post_json(
            "/v1/stories/generate",
            &json!({"target_phonemes": ["l"], "words": ["lake", "lamp", "leaf", "lion"], "template_id": "journey", "seed": 3}),
        )
        .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
    let generated = r.json()["story_id"].as_str().unwrap().to_owned();
    let listed = api.get("/v1/stories").await.json();
    let ids: Vec<&str> = listed.as_array().unwrap().iter().map(|s| s["story_id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"garden-walk") && ids.contains(&generated.as_str()));
    let r = api
        .post_json(
            "/v1/stories/generate",
            &json!({"target_phonemes": ["l"], "words": ["lake"], "template_id": "journey", "seed": 3}),
        )
        .await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "InsufficientWords");
}

#[tokio::test]
async fn turn_view_retry_feedback_and_choice() {
    let (_d, api, _) = fresh();
    let sid = start(&api).await;
    let turn = api.get(&format!("/v1/sessions/{sid}/turn")).await.json();
    assert_eq!(turn["highlighted_words"], json!(["rabbit"]));
    assert_eq!(turn["parent_tip"], "Point at the rabbit and say the word slowly together.");
    assert_eq!(turn["expected_response"]["template"], "I see a ___.");
    let cues: Vec<&str> = turn["mouth_cues"].as_array().unwrap().iter().map(|c| c["phoneme"].as_str().unwrap()).collect();
    assert_eq!(cues, ["r", "l"]);
    assert!(turn.get("choice").is_none());

    let r = say(&api, &sid, "p1-a1").await.json();
    assert_eq!(r["outcome"], "advance");
    assert_eq!(r["score"]["band"], "good");
    let r = say(&api, &sid, "p2-a1").await.json();
    assert_eq!((&r["outcome"], &r["feedback"]), (&json!("retry"), &json!("voice_prompt")));
    assert!(r["voice_prompt_audio"].as_str().unwrap().starts_with("tts-"));
    assert!(r.get("transcription_cue").is_none());
    say(&api, &sid, "p2-a2").await;
    say(&api, &sid, "p3-a1").await;
    let r = say(&api, &sid, "p3-a2").await.json();
    assert_eq!(r["feedback"], "transcription_cue");
    assert_eq!(r["transcription_cue"], json!({"orthographic": "", "phonemic": ""}));
    let r = say(&api, &sid, "p3-a3").await.json();
    assert_eq!(r["awaiting_choice"], true);

    let turn = api.get(&format!("/v1/sessions/{sid}/turn")).await.json();
    assert_eq!(turn["choice"]["options"].as_array().unwrap().len(), 2);
    assert_error(&say(&api, &sid, "p4-a1").await, StatusCode::CONFLICT, "ChoicePending");
    let r = api.post_json(&format!("/v1/sessions/{sid}/choice"), &json!({"option_id": "swim"})).await;
    assert_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "InvalidOption");
    let r = api.post_json(&format!("/v1/sessions/{sid}/choice"), &json!({"option_id": "run"})).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["cursor"]["scene_id"], "pond");
    let turn = api.get(&format!("/v1/sessions/{sid}/turn")).await.json();
    assert_eq!(turn["image_ref"], "img/pond");
}

#[tokio::test]
async fn completed_session_rejects_attempts() {
    let (_d, api, _) = fresh();
    api.run_golden().await;
    let s = api.get(&format!("/v1/sessions/{GOLDEN_SESSION}")).await.json();
    assert_eq!(s["status"], "completed");
    assert_error(&say(&api, GOLDEN_SESSION, "p1-a1").await, StatusCode::CONFLICT, "SessionNotActive");
}

#[tokio::test]
async fn uploaded_blob_is_content_addressed_and_replayable() {
    let (dir, api, _) = fresh();
    let sid = start(&api).await;
    let bytes = b"RIFF\x00\x00fake-wave-rabbit".to_vec();
    let r = AudioRef::for_content(&bytes);
    // the stub transcriber reads sidecars named after the content address
    std::fs::write(dir.path().join("audio").join(format!("{r}.txt")), "rabbit").unwrap();
    std::fs::write(dir.path().join("audio").join(format!("{r}.ipa")), "ræbət").unwrap();
    let resp = api
        .post_multipart(&format!("/v1/sessions/{sid}/attempts"), "audio", &bytes, true)
        .await;
    assert_eq!(resp.status, StatusCode::OK, "{}", resp.text());
    let body = resp.json();
    assert_eq!(body["score"]["audio_ref"], r.as_str());
    assert_eq!(body["score"]["band"], "excellent");
    let aid = body["score"]["attempt_id"].as_str().unwrap();
    let clip = api.get(&format!("/v1/sessions/{sid}/attempts/{aid}/audio")).await;
    assert_eq!(clip.status, StatusCode::OK);
    assert_eq!(clip.body, bytes);
    assert_eq!(api.get(&format!("/v1/audio/{r}")).await.body, bytes);
    assert_error(
        &api.get(&format!("/v1/sessions/{sid}/attempts/nope/audio")).await,
        StatusCode::NOT_FOUND,
        "UnknownAttempt",
    );
}

#[tokio::test]
async fn dashboard_cards_and_report_are_projections() {
    let (dir, api, svc) = fresh();
    api.run_golden().await;
    let t = BandThresholds::default();
    let store = svc.store();

    let dash = api.get(&format!("/v1/children/{GOLDEN_CHILD}/dashboard")).await.json();
    let expected = aggregate_child(GOLDEN_CHILD, TimeRange::all(), store, &t).unwrap();
    assert_eq!(dash, serde_json::to_value(&expected).unwrap());
    assert_eq!(dash["total_productions"], 11);

    let cards = api.get(&format!("/v1/children/{GOLDEN_CHILD}/cards?band=needs_practice")).await.json();
    let filter = CardFilter {
        band: Some(QualityBand::NeedsPractice),
        ..CardFilter::default()
    };
    let expected = recording_cards(GOLDEN_CHILD, &filter, TimeRange::all(), store, &t).unwrap();
    assert_eq!(cards, serde_json::to_value(&expected).unwrap());
    assert_eq!(cards.as_array().unwrap().len(), 6);

    let windowed = api
        .get(&format!(
            "/v1/children/{GOLDEN_CHILD}/cards?word=red&from=2025-01-01T00:00:11.000Z&to=2025-01-01T00:01:00.000Z"
        ))
        .await
        .json();
    assert_eq!(windowed.as_array().unwrap().len(), 2);

    let report = api.get(&format!("/v1/children/{GOLDEN_CHILD}/report")).await;
    let expected = export_report(GOLDEN_CHILD, TimeRange::all(), store, &t).unwrap().to_json();
    assert_eq!(report.text(), expected);

    // a second process over the same directory reads the same bytes
    let again = service(&soundstory::platform::Config { data_dir: dir.path().into(), ..Default::default() }, Arc::new(StepClock::fixture()));
    assert_eq!(again.export(GOLDEN_CHILD, TimeRange::all()).unwrap().to_json(), expected);
}

#[tokio::test]
async fn words_practice_recommend_and_score() {
    let (_d, api, svc) = fresh();
    let card = api.get("/v1/words/rabbit/practice").await.json();
    assert_eq!(card["ipa"], json!(["r", "æ", "b", "ə", "t"]));
    assert_eq!(card["variants"], json!(["ræbɪt"]));
    assert!(card["model_audio"].as_str().unwrap().starts_with("tts-"));
    assert_eq!(card["mouth_cues"][0]["phoneme"], "r");
    assert_error(&api.get("/v1/words/zyzzyva/practice").await, StatusCode::NOT_FOUND, "OutOfVocabulary");

    let rec = api.get("/v1/words/recommend?phoneme=r&position=initial&count=3").await.json();
    assert_eq!(rec["words"], json!(svc.recommend("r", soundstory::lexicon::Position::Initial, 3).unwrap()));
    assert_error(
        &api.get("/v1/words/recommend?phoneme=%E2%82%AC").await,
        StatusCode::UNPROCESSABLE_ENTITY,
        "InvalidTarget",
    );

    let s = api.post_json("/v1/score", &json!({"word": "fish", "hypothesis_ipa": "fɪʃ"})).await.json();
    assert_eq!(s["distance"], 0.0);
    assert_eq!(s["band"], "excellent");
    let s = api.post_json("/v1/score", &json!({"word": "fish", "hypothesis_ipa": "f@"})).await;
    assert_error(&s, StatusCode::UNPROCESSABLE_ENTITY, "UnknownSymbol");
}

#[tokio::test]
async fn events_endpoint_serves_ndjson() {
    let (_d, api, _) = fresh();
    let sid = start(&api).await;
    let r = api.get(&format!("/v1/sessions/{sid}/events")).await;
    assert_eq!(r.content_type.as_deref(), Some("application/x-ndjson"));
    let lines: Vec<Value> = r.text().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["kind"], "session_started");
}
