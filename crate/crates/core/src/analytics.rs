//! Dashboard statistics and recording cards, computed on read from the
//! append-only event logs.
//!
//! Bands are recomputed from each attempt's stored distance under the
//! thresholds passed in, so changing thresholds relabels history.

use std::borrow::Cow;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::AudioRef;
use crate::phonology::{BandThresholds, FeatureDistance, QualityBand};
use crate::scoring::BandHistogram;
use crate::session::{AttemptScoredPayload, EventKind, SessionEvent};
use crate::time::Timestamp;

/// Identifies the report layout; bumped on any field change.
pub const REPORT_FORMAT: &str = "soundstory-report/1";

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("event store unavailable: {0}")]
    StoreUnavailable(String),
    #[error("malformed attempt event in session {session_id}: {message}")]
    Malformed { session_id: String, message: String },
}

/// Anything that can hand over every stored session event.
pub trait EventSource {
    fn events(&self) -> Result<Cow<'_, [SessionEvent]>, AnalyticsError>;
}

impl EventSource for [SessionEvent] {
    fn events(&self) -> Result<Cow<'_, [SessionEvent]>, AnalyticsError> {
        Ok(Cow::Borrowed(self))
    }
}

impl EventSource for Vec<SessionEvent> {
    fn events(&self) -> Result<Cow<'_, [SessionEvent]>, AnalyticsError> {
        Ok(Cow::Borrowed(self))
    }
}

/// Half-open interval `[from, to)`; open ends are unbounded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
}

impl TimeRange {
    pub fn all() -> TimeRange {
        TimeRange::default()
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordProductionStats {
    pub orthography: String,
    pub production_count: u64,
    pub band_histogram: BandHistogram,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildAggregate {
    pub child_id: String,
    pub total_productions: u64,
    pub overall: BandHistogram,
    /// Sorted by word.
    pub words: Vec<WordProductionStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingCard {
    pub attempt_id: String,
    pub session_id: String,
    pub word: String,
    pub band: QualityBand,
    pub band_label: String,
    pub phonemic_transcript: String,
    pub orthographic_transcript: String,
    pub prompt_text: String,
    pub distance: f64,
    pub audio_ref: AudioRef,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardFilter {
    #[serde(default)]
    pub word: Option<String>,
    #[serde(default)]
    pub band: Option<QualityBand>,
    #[serde(default)]
    pub session: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub format: String,
    pub child_id: String,
    pub period: TimeRange,
    pub thresholds: BandThresholds,
    pub summary: ChildAggregate,
    pub cards: Vec<RecordingCard>,
}

impl ProgressReport {
    /// Pretty JSON with a trailing newline. Identical data gives identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// One scored attempt pulled out of the log.
struct Scored {
    session_id: String,
    ts: Timestamp,
    payload: AttemptScoredPayload,
}

fn scored_attempts(
    source: &(impl EventSource + ?Sized),
    child_id: &str,
    range: TimeRange,
) -> Result<Vec<Scored>, AnalyticsError> {
    let mut out = Vec::new();
    for e in source.events()?.iter() {
        // cheap look at the raw payload before the full decode
        if e.kind != EventKind::AttemptScored
            || !range.contains(e.ts)
            || e.payload.get("child_id").is_some_and(|c| c != child_id)
        {
            continue;
        }
        let payload: AttemptScoredPayload =
            e.decode(EventKind::AttemptScored).map_err(|err| AnalyticsError::Malformed {
                session_id: e.session_id.clone(),
                message: err.to_string(),
            })?;
        if payload.child_id == child_id {
            out.push(Scored {
                session_id: e.session_id.clone(),
                ts: e.ts,
                payload,
            });
        }
    }
    Ok(out)
}

fn band_at_read(s: &AttemptScoredPayload, thresholds: &BandThresholds) -> QualityBand {
    s.record.score.band_under(thresholds)
}

/// Per-word production counts, band histograms and mean distances.
pub fn aggregate_child(
    child_id: &str,
    range: TimeRange,
    source: &(impl EventSource + ?Sized),
    thresholds: &BandThresholds,
) -> Result<ChildAggregate, AnalyticsError> {
    struct Acc {
        count: u64,
        hist: BandHistogram,
        units: u64,
    }
    let mut by_word: BTreeMap<String, Acc> = BTreeMap::new();
    let mut overall = BandHistogram::default();
    for s in scored_attempts(source, child_id, range)? {
        let band = band_at_read(&s.payload, thresholds);
        overall.add(band);
        let acc = by_word
            .entry(s.payload.record.score.target.orthography.clone())
            .or_insert(Acc {
                count: 0,
                hist: BandHistogram::default(),
                units: 0,
            });
        acc.count += 1;
        acc.hist.add(band);
        acc.units += u64::from(s.payload.record.score.distance_units);
    }
    let words: Vec<WordProductionStats> = by_word
        .into_iter()
        .map(|(orthography, a)| WordProductionStats {
            orthography,
            production_count: a.count,
            band_histogram: a.hist,
            mean_distance: a.units as f64 / (f64::from(FeatureDistance::UNITS_PER_EDIT) * a.count as f64),
        })
        .collect();
    Ok(ChildAggregate {
        child_id: child_id.to_owned(),
        total_productions: overall.total(),
        overall,
        words,
    })
}

/// Matching cards, newest first (ties by attempt id).
pub fn recording_cards(
    child_id: &str,
    filter: &CardFilter,
    range: TimeRange,
    source: &(impl EventSource + ?Sized),
    thresholds: &BandThresholds,
) -> Result<Vec<RecordingCard>, AnalyticsError> {
    let word = filter.word.as_ref().map(|w| w.trim().to_lowercase());
    let mut cards: Vec<RecordingCard> = scored_attempts(source, child_id, range)?
        .into_iter()
        .filter(|s| filter.session.as_ref().is_none_or(|id| *id == s.session_id))
        .filter(|s| word.as_ref().is_none_or(|w| *w == s.payload.record.score.target.orthography))
        .filter_map(|s| {
            let band = band_at_read(&s.payload, thresholds);
            if filter.band.is_some_and(|b| b != band) {
                return None;
            }
            let score = s.payload.record.score;
            Some(RecordingCard {
                attempt_id: score.attempt_id,
                session_id: s.session_id,
                word: score.target.orthography,
                band,
                band_label: band.label().to_owned(),
                phonemic_transcript: score.hypothesis.to_string(),
                orthographic_transcript: score.orthographic_transcript,
                prompt_text: s.payload.prompt_text,
                distance: score.distance,
                audio_ref: score.audio_ref,
                timestamp: s.ts,
            })
        })
        .collect();
    cards.sort_by(|a, b| b.timestamp.cmp(&a.timestamp).then_with(|| a.attempt_id.cmp(&b.attempt_id)));
    Ok(cards)
}

/// Aggregates plus every card for the period.
pub fn export_report(
    child_id: &str,
    period: TimeRange,
    source: &(impl EventSource + ?Sized),
    thresholds: &BandThresholds,
) -> Result<ProgressReport, AnalyticsError> {
    let events = source.events()?;
    Ok(ProgressReport {
        format: REPORT_FORMAT.to_owned(),
        child_id: child_id.to_owned(),
        period,
        thresholds: *thresholds,
        summary: aggregate_child(child_id, period, &*events, thresholds)?,
        cards: recording_cards(child_id, &CardFilter::default(), period, &*events, thresholds)?,
    })
}
