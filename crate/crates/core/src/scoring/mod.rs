//! End-to-end scoring of one recorded attempt.
//!
//! The hypothesis is cleaned and rhotic-normalized, compared with the target
//! pronunciation by feature edit distance, and banded on the raw distance.
//! Sentence attempts first locate the best-matching window in the utterance
//! and check that the target word appears in the orthographic transcript.

mod batch;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::AudioRef;
use crate::lexicon::{Lexicon, LexiconError};
use crate::phonology::{
    band_of, feature_edit_distance_with, normalize_rhotics, BandError, BandThresholds, DistanceError, EditCosts,
    FeatureDistance, FeatureTable, IpaError, PhoneSeq, QualityBand,
};
use crate::time::Timestamp;

pub use batch::{read_batch_csv, BatchInput, BatchReport, BatchRow, BatchSummary};

/// Window length slack, in segments, around the target length when searching
/// an utterance for the target word.
pub const WINDOW_SLACK: usize = 2;

/// Maximum letter edit distance for an orthographic token to count as the target word.
pub const TOKEN_MATCH_MAX_EDITS: usize = 2;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error(transparent)]
    Ipa(#[from] IpaError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("reference pronunciation for {0:?} is empty")]
    EmptyReference(String),
    #[error("batch input: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferencePronunciation {
    pub orthography: String,
    /// Cleaned and rhotic-normalized; never empty.
    pub phonemes: PhoneSeq,
}

impl ReferencePronunciation {
    pub fn new(orthography: impl Into<String>, phonemes: PhoneSeq) -> Result<Self, ScoringError> {
        let orthography = orthography.into();
        let phonemes = normalize_rhotics(&phonemes.cleaned());
        if phonemes.is_empty() {
            return Err(ScoringError::EmptyReference(orthography));
        }
        Ok(ReferencePronunciation { orthography, phonemes })
    }

    pub fn from_lexicon(word: &str, lexicon: &Lexicon) -> Result<Self, ScoringError> {
        let phonemes = lexicon.to_ipa(word)?;
        ReferencePronunciation::new(word.trim().to_lowercase(), phonemes)
    }
}

/// Contiguous span of an utterance, in segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpan {
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowMatch {
    pub span: WindowSpan,
    pub distance: FeatureDistance,
}

/// Per-attempt metadata supplied by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptContext {
    pub attempt_id: String,
    pub audio_ref: AudioRef,
    pub orthographic_transcript: String,
    pub timestamp: Timestamp,
}

/// One scored production.
///
/// When the target was not found the attempt is recorded at the all-deletion
/// worst case (`distance == len(target)`) and banded `NeedsPractice`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptScore {
    pub attempt_id: String,
    pub target: ReferencePronunciation,
    pub hypothesis: PhoneSeq,
    pub orthographic_transcript: String,
    pub distance: f64,
    pub distance_units: u32,
    pub pfer: f64,
    pub band: QualityBand,
    pub target_found: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpan>,
    pub audio_ref: AudioRef,
    pub timestamp: Timestamp,
}

impl AttemptScore {
    /// Band implied by the stored distance under `thresholds`.
    pub fn band_under(&self, thresholds: &BandThresholds) -> QualityBand {
        if !self.target_found {
            return QualityBand::NeedsPractice;
        }
        band_of(self.distance, thresholds).unwrap_or(QualityBand::NeedsPractice)
    }

    /// Structural invariants of a scored attempt.
    pub fn is_consistent(&self, thresholds: &BandThresholds) -> bool {
        let len = self.target.phonemes.len() as f64;
        let value = f64::from(self.distance_units) / f64::from(FeatureDistance::UNITS_PER_EDIT);
        let pfer_ok = (self.pfer - self.distance / len).abs() < 1e-12;
        let found_ok = self.target_found || self.band == QualityBand::NeedsPractice;
        value == self.distance && pfer_ok && found_ok && self.band == self.band_under(thresholds)
    }
}

/// Scoring configuration shared by every entry point (API, CLI, batch).
#[derive(Debug, Clone)]
pub struct Scorer {
    table: Arc<FeatureTable>,
    thresholds: BandThresholds,
    costs: EditCosts,
}

impl Scorer {
    pub fn new(table: Arc<FeatureTable>) -> Scorer {
        Scorer {
            table,
            thresholds: BandThresholds::default(),
            costs: EditCosts::default(),
        }
    }

    pub fn bundled() -> Scorer {
        Scorer::new(Arc::new(FeatureTable::bundled()))
    }

    pub fn with_thresholds(mut self, thresholds: BandThresholds) -> Scorer {
        self.thresholds = thresholds;
        self
    }

    pub fn with_costs(mut self, costs: EditCosts) -> Scorer {
        self.costs = costs;
        self
    }

    pub fn table(&self) -> &FeatureTable {
        &self.table
    }

    pub fn thresholds(&self) -> &BandThresholds {
        &self.thresholds
    }

    pub fn costs(&self) -> EditCosts {
        self.costs
    }

    pub fn distance(&self, reference: &PhoneSeq, hypothesis: &PhoneSeq) -> Result<FeatureDistance, ScoringError> {
        Ok(feature_edit_distance_with(reference, hypothesis, &self.table, self.costs)?)
    }

    fn all_deletion(&self, target: &ReferencePronunciation) -> FeatureDistance {
        FeatureDistance::from_units(target.phonemes.len() as u32 * self.costs.indel_units)
    }

    fn package(
        &self,
        target: &ReferencePronunciation,
        hypothesis: PhoneSeq,
        measured: Option<(FeatureDistance, Option<WindowSpan>)>,
        ctx: AttemptContext,
    ) -> Result<AttemptScore, ScoringError> {
        let (distance, window, found) = match measured {
            Some((d, w)) => (d, w, true),
            None => (self.all_deletion(target), None, false),
        };
        let band = if found {
            band_of(distance.value(), &self.thresholds)?
        } else {
            QualityBand::NeedsPractice
        };
        let score = AttemptScore {
            attempt_id: ctx.attempt_id,
            target: target.clone(),
            hypothesis,
            orthographic_transcript: ctx.orthographic_transcript,
            distance: distance.value(),
            distance_units: distance.units(),
            pfer: distance.value() / target.phonemes.len() as f64,
            band,
            target_found: found,
            window,
            audio_ref: ctx.audio_ref,
            timestamp: ctx.timestamp,
        };
        debug_assert!(score.is_consistent(&self.thresholds));
        Ok(score)
    }

    /// Scores an isolated-word production. The target counts as found when
    /// the distance beats deleting the whole target.
    pub fn score_word_attempt(
        &self,
        target: &ReferencePronunciation,
        hypothesis: &PhoneSeq,
        ctx: AttemptContext,
    ) -> Result<AttemptScore, ScoringError> {
        let hyp = normalize_rhotics(&hypothesis.cleaned());
        let d = self.distance(&target.phonemes, &hyp)?;
        let measured = (d < self.all_deletion(target)).then_some((d, None));
        self.package(target, hyp, measured, ctx)
    }

    /// Best window of `utterance` for `target`.
    ///
    /// Window lengths range over `[max(1, n - 2), n + 2]` for a target of
    /// length `n`; an utterance shorter than the smallest window is taken
    /// whole. Ties go to the earliest start, then the shortest window.
    ///
    /// Rhotic merging is applied to each window rather than to the whole
    /// utterance, so a schwa ending one word never swallows the r starting
    /// the next. Spans index the cleaned utterance.
    pub fn locate_target_in_sentence(
        &self,
        target: &ReferencePronunciation,
        utterance: &PhoneSeq,
    ) -> Result<WindowMatch, ScoringError> {
        let n = target.phonemes.len();
        if utterance.is_empty() {
            return Ok(WindowMatch {
                span: WindowSpan { start: 0, len: 0 },
                distance: self.all_deletion(target),
            });
        }
        let min_len = n.saturating_sub(WINDOW_SLACK).max(1).min(utterance.len());
        let max_len = (n + WINDOW_SLACK).min(utterance.len());
        let mut best: Option<WindowMatch> = None;
        for start in 0..utterance.len() {
            for len in min_len..=max_len {
                if start + len > utterance.len() {
                    break;
                }
                let window = normalize_rhotics(&utterance.window(start, len));
                let d = self.distance(&target.phonemes, &window)?;
                if best.as_ref().is_none_or(|b| d < b.distance) {
                    best = Some(WindowMatch {
                        span: WindowSpan { start, len },
                        distance: d,
                    });
                }
            }
        }
        Ok(best.expect("non-empty utterance has at least one window"))
    }

    /// Scores a sentence production. The target counts as found only when
    /// the orthographic transcript contains the word (fuzzily). The stored
    /// hypothesis is the cleaned utterance without rhotic merging.
    pub fn score_sentence_attempt(
        &self,
        target: &ReferencePronunciation,
        utterance: &PhoneSeq,
        ctx: AttemptContext,
    ) -> Result<AttemptScore, ScoringError> {
        let utt = utterance.cleaned();
        let measured = if transcript_mentions(&ctx.orthographic_transcript, &target.orthography) {
            let m = self.locate_target_in_sentence(target, &utt)?;
            Some((m.distance, Some(m.span)))
        } else {
            None
        };
        self.package(target, utt, measured, ctx)
    }
}

/// Lowercased word tokens with punctuation removed.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| t.replace('\'', "").to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// True when some token of `transcript` is within two letter edits of `word`.
pub fn transcript_mentions(transcript: &str, word: &str) -> bool {
    let target = word.trim().to_lowercase();
    if target.is_empty() {
        return false;
    }
    word_tokens(transcript)
        .iter()
        .any(|t| strsim::levenshtein(t, &target) <= TOKEN_MATCH_MAX_EDITS)
}

/// Running counts per band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandHistogram {
    pub excellent: u64,
    pub good: u64,
    pub fair: u64,
    pub needs_practice: u64,
}

impl BandHistogram {
    pub fn add(&mut self, band: QualityBand) {
        *self.slot(band) += 1;
    }

    pub fn get(&self, band: QualityBand) -> u64 {
        match band {
            QualityBand::Excellent => self.excellent,
            QualityBand::Good => self.good,
            QualityBand::Fair => self.fair,
            QualityBand::NeedsPractice => self.needs_practice,
        }
    }

    fn slot(&mut self, band: QualityBand) -> &mut u64 {
        match band {
            QualityBand::Excellent => &mut self.excellent,
            QualityBand::Good => &mut self.good,
            QualityBand::Fair => &mut self.fair,
            QualityBand::NeedsPractice => &mut self.needs_practice,
        }
    }

    pub fn total(&self) -> u64 {
        self.excellent + self.good + self.fair + self.needs_practice
    }
}

impl FromIterator<QualityBand> for BandHistogram {
    fn from_iter<I: IntoIterator<Item = QualityBand>>(iter: I) -> Self {
        let mut h = BandHistogram::default();
        for b in iter {
            h.add(b);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonology::{substitution_cost, tokenize_ipa, Phone};

    fn seq(s: &str) -> PhoneSeq {
        tokenize_ipa(s).unwrap()
    }

    fn target(word: &str, ipa: &str) -> ReferencePronunciation {
        ReferencePronunciation::new(word, seq(ipa)).unwrap()
    }

    fn ctx(transcript: &str) -> AttemptContext {
        AttemptContext {
            attempt_id: "a1".into(),
            audio_ref: AudioRef::new("clip").unwrap(),
            orthographic_transcript: transcript.into(),
            timestamp: Timestamp::from_millis(0),
        }
    }

    #[test]
    fn word_attempt_close_substitution() {
        let s = Scorer::bundled();
        let score = s.score_word_attempt(&target("fish", "fɪs"), &seq("fɪʃ"), ctx("fish")).unwrap();
        assert_eq!(score.distance_units, 2);
        assert_eq!(score.band, QualityBand::Excellent);
        assert!(score.target_found);
        assert!(score.is_consistent(s.thresholds()));
    }

    #[test]
    fn word_attempt_exact() {
        let s = Scorer::bundled();
        let score = s.score_word_attempt(&target("rate", "reɪt"), &seq("reɪt"), ctx("rate")).unwrap();
        assert_eq!(score.distance, 0.0);
        assert_eq!(score.pfer, 0.0);
        assert_eq!(score.band, QualityBand::Excellent);
    }

    #[test]
    fn word_attempt_silence_is_all_deletion() {
        let s = Scorer::bundled();
        let score = s
            .score_word_attempt(&target("rate", "reɪt"), &PhoneSeq::empty(), ctx(""))
            .unwrap();
        assert_eq!(score.distance, 4.0);
        assert_eq!(score.pfer, 1.0);
        assert_eq!(score.band, QualityBand::NeedsPractice);
        assert!(!score.target_found);
        assert!(score.is_consistent(s.thresholds()));
    }

    #[test]
    fn word_attempt_hypothesis_is_cleaned() {
        let s = Scorer::bundled();
        let score = s
            .score_word_attempt(&target("butter", "bʌtɚ"), &seq("ˈbʌtʰəɹ"), ctx("butter"))
            .unwrap();
        assert_eq!(score.distance, 0.0);
        assert_eq!(score.hypothesis.symbols(), ["b", "ʌ", "t", "ɚ"]);
    }

    #[test]
    fn empty_reference_rejected() {
        assert!(matches!(
            ReferencePronunciation::new("x", PhoneSeq::empty()),
            Err(ScoringError::EmptyReference(_))
        ));
    }

    #[test]
    fn locate_exact_substring() {
        let s = Scorer::bundled();
        let m = s
            .locate_target_in_sentence(&target("rabbit", "ɹæbɪt"), &seq("asiəɹæbɪt"))
            .unwrap();
        assert_eq!(m.span, WindowSpan { start: 4, len: 5 });
        assert_eq!(m.distance, FeatureDistance::ZERO);
    }

    #[test]
    fn locate_with_gliding() {
        let s = Scorer::bundled();
        let m = s
            .locate_target_in_sentence(&target("rabbit", "ɹæbɪt"), &seq("asiəwæbɪt"))
            .unwrap();
        assert_eq!(m.span.start, 4);
        let expected = substitution_cost(&Phone::new("ɹ").unwrap(), &Phone::new("w").unwrap(), s.table()).unwrap();
        assert_eq!(m.distance.value(), expected);
    }

    #[test]
    fn locate_in_empty_utterance() {
        let s = Scorer::bundled();
        let m = s.locate_target_in_sentence(&target("p", "p"), &PhoneSeq::empty()).unwrap();
        assert_eq!(m.distance.value(), 1.0);
    }

    #[test]
    fn locate_short_utterance_uses_whole() {
        let s = Scorer::bundled();
        let m = s.locate_target_in_sentence(&target("rocket", "rɑkət"), &seq("ɑk")).unwrap();
        assert_eq!(m.span, WindowSpan { start: 0, len: 2 });
    }

    #[test]
    fn sentence_attempt_found() {
        let s = Scorer::bundled();
        let score = s
            .score_sentence_attempt(&target("rabbit", "ɹæbɪt"), &seq("asiəɹæbɪt"), ctx("I see a rabbit"))
            .unwrap();
        assert!(score.target_found);
        assert_eq!(score.band, QualityBand::Excellent);
        assert_eq!(score.window, Some(WindowSpan { start: 4, len: 5 }));
    }

    #[test]
    fn sentence_attempt_omitted_word() {
        let s = Scorer::bundled();
        let score = s
            .score_sentence_attempt(&target("rabbit", "ɹæbɪt"), &seq("asiəɹæbɪt"), ctx("I see a dog"))
            .unwrap();
        assert!(!score.target_found);
        assert_eq!(score.band, QualityBand::NeedsPractice);
        assert_eq!(score.distance, 5.0);
    }

    #[test]
    fn sentence_attempt_misspelled_token() {
        let s = Scorer::bundled();
        let score = s
            .score_sentence_attempt(&target("rabbit", "ɹæbɪt"), &seq("əwæbɪt"), ctx("a wabbit"))
            .unwrap();
        assert!(score.target_found);
        assert_eq!(score.band, QualityBand::Good);
    }

    #[test]
    fn token_matching() {
        assert!(transcript_mentions("I see a Rabbit!", "rabbit"));
        assert!(transcript_mentions("a wabbit", "rabbit"));
        assert!(transcript_mentions("wabit.", "rabbit"));
        assert!(!transcript_mentions("I see a dog", "rabbit"));
        assert!(!transcript_mentions("", "rabbit"));
        assert_eq!(word_tokens("It's a DOG, ok?"), ["its", "a", "dog", "ok"]);
    }

    #[test]
    fn histogram_counts() {
        let h: BandHistogram = [QualityBand::Excellent, QualityBand::Excellent, QualityBand::Fair]
            .into_iter()
            .collect();
        assert_eq!(h.get(QualityBand::Excellent), 2);
        assert_eq!(h.total(), 3);
    }
}
