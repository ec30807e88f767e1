use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use soundstory::analytics::{aggregate_child, recording_cards, CardFilter, TimeRange};
use soundstory::phonology::{BandThresholds, QualityBand};
use soundstory::session::SessionEvent;
use soundstory::time::Timestamp;

pub const CHILDREN: [&str; 3] = ["kid-a", "kid-b", "kid-c"];
pub const WORDS: [&str; 8] = ["rabbit", "rain", "red", "rock", "lake", "lamp", "leaf", "river"];
pub const START_MS: i64 = 1_735_689_600_000;

/// 10 000 events across 60 sessions; about three quarters are scored attempts.
pub fn synthetic_log(seed: u64) -> Vec<SessionEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let session = i % 60;
        let child = CHILDREN[session % 3];
        let sid = format!("sess-{:06}", session + 1);
        let ts = Timestamp::from_millis(START_MS + i as i64 * 1500);
        let line = if rng.gen_bool(0.75) {
            let word = WORDS[rng.gen_range(0..WORDS.len())];
            let units: u32 = rng.gen_range(0..=110);
            let found = rng.gen_bool(0.9);
            let len = 4.0;
            json!({
                "ts": ts, "session_id": sid, "kind": "attempt_scored",
                "payload": {
                    "awaiting_choice": false, "child_id": child, "feedback_given": "none",
                    "outcome": "advance", "proceeded_after_failure": false, "prompt_index": 0,
                    "prompt_text": format!("I see a {word}."), "retry_index": 0,
                    "scene_id": "s1", "turn_id": "t1",
                    "score": {
                        "attempt_id": format!("{sid}-a{i:05}"), "audio_ref": format!("clip-{i}"),
                        "band": "fair", "distance": units as f64 / 24.0, "distance_units": units,
                        "hypothesis": ["r", "ɛ", "d"], "orthographic_transcript": word,
                        "pfer": units as f64 / 24.0 / len,
                        "target": { "orthography": word, "phonemes": ["r", "æ", "b", "t"] },
                        "target_found": found, "timestamp": ts
                    }
                }
            })
        } else {
            json!({
                "ts": ts, "session_id": sid, "kind": "retry_prompted",
                "payload": { "attempt_id": format!("{sid}-a{i:05}"), "retry_count": 1, "feedback": "voice_prompt" }
            })
        };
        out.push(SessionEvent::from_line(&line.to_string()).unwrap());
    }
    out
}

#[derive(Debug, Default, PartialEq)]
struct Naive {
    count: u64,
    bands: [u64; 4],
    distance_sum: f64,
}

/// Straight group-by over the raw JSON, independent of the library's typed payloads.
fn naive(raw: &[Value], child: &str, range: TimeRange, t: &BandThresholds) -> BTreeMap<String, Naive> {
    let mut by_word: BTreeMap<String, Naive> = BTreeMap::new();
    for v in raw {
        if v["kind"] != "attempt_scored" || v["payload"]["child_id"] != child {
            continue;
        }
        let ts: Timestamp = v["ts"].as_str().unwrap().parse().unwrap();
        if range.from.is_some_and(|f| ts < f) || range.to.is_some_and(|to| ts >= to) {
            continue;
        }
        let s = &v["payload"]["score"];
        let d = s["distance"].as_f64().unwrap();
        let band = if !s["target_found"].as_bool().unwrap() || d > t.fair_max {
            3
        } else if d <= t.excellent_max {
            0
        } else if d <= t.good_max {
            1
        } else {
            2
        };
        let acc = by_word.entry(s["target"]["orthography"].as_str().unwrap().into()).or_default();
        acc.count += 1;
        acc.bands[band] += 1;
        acc.distance_sum += d;
    }
    by_word
}

/// Returns the time spent inside library calls.
pub fn check_against_naive(events: &[SessionEvent], raw: &[Value], range: TimeRange) -> Duration {
    let t = BandThresholds::default();
    let mut grand_total = 0;
    let mut spent = Duration::ZERO;
    for child in CHILDREN {
        let start = Instant::now();
        let agg = aggregate_child(child, range, events, &t).unwrap();
        let cards = recording_cards(child, &CardFilter::default(), range, events, &t).unwrap();
        spent += start.elapsed();
        let oracle = naive(raw, child, range, &t);
        assert_eq!(agg.words.len(), oracle.len());
        let mut sum = 0;
        for w in &agg.words {
            let o = &oracle[&w.orthography];
            assert_eq!(w.production_count, o.count, "{child}/{}", w.orthography);
            let h = &w.band_histogram;
            assert_eq!([h.excellent, h.good, h.fair, h.needs_practice], o.bands);
            assert!((w.mean_distance - o.distance_sum / o.count as f64).abs() < 1e-9);
            assert_eq!(h.total(), w.production_count);
            sum += w.production_count;
        }
        // conservation
        assert_eq!(sum, agg.total_productions);
        assert_eq!(agg.overall.total(), agg.total_productions);
        assert_eq!(cards.len() as u64, agg.total_productions);
        for band in QualityBand::ALL {
            let filter = CardFilter {
                band: Some(band),
                ..CardFilter::default()
            };
            let n = recording_cards(child, &filter, range, events, &t).unwrap().len() as u64;
            assert_eq!(n, agg.overall.get(band));
        }
        grand_total += agg.total_productions;
    }
    if range == TimeRange::all() {
        let scored = raw.iter().filter(|v| v["kind"] == "attempt_scored").count() as u64;
        assert_eq!(grand_total, scored);
    }
    spent
}

