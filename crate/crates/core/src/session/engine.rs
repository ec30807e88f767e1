use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::event::*;
use super::{AttemptRecord, Cursor, Feedback, SessionError, SessionState, SessionStatus, MAX_RETRIES};
use crate::adapters::{AudioRef, StubSynthesizer, Synthesizer, TranscriptionResult, Transcriber};
use crate::lexicon::Lexicon;
use crate::phonology::tokenize_ipa;
use crate::scoring::{AttemptContext, AttemptScore, ReferencePronunciation, Scorer, ScoringError};
use crate::story::{validate_story, Mode, StoryConfig, Turn};
use crate::time::{Clock, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Advance,
    Retry,
    ProceedFlagged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Idle time after which an active session is abandoned.
    pub inactivity_timeout_secs: i64,
    /// Voice used for sentence read-back.
    pub voice_profile: String,
    /// Retries per prompt; values above [`MAX_RETRIES`] are capped.
    pub retry_cap: u8,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            inactivity_timeout_secs: 600,
            voice_profile: "narrator".into(),
            retry_cap: MAX_RETRIES,
        }
    }
}

/// Result of one operation: the events it emitted and the state they produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: SessionState,
    pub events: Vec<SessionEvent>,
}

/// What happened to one submitted attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptResult {
    pub outcome: Outcome,
    /// Feedback the child gets next; `None` unless the outcome is a retry.
    pub feedback: Feedback,
    pub score: AttemptScore,
}

enum Next {
    Prompt(Cursor),
    Choice,
    End,
}

pub struct SessionEngine {
    scorer: Scorer,
    lexicon: Arc<Lexicon>,
    clock: Arc<dyn Clock>,
    synthesizer: Arc<dyn Synthesizer>,
    config: EngineConfig,
}

impl SessionEngine {
    pub fn new(scorer: Scorer, lexicon: Arc<Lexicon>, clock: Arc<dyn Clock>) -> SessionEngine {
        SessionEngine {
            scorer,
            lexicon,
            clock,
            synthesizer: Arc::new(StubSynthesizer),
            config: EngineConfig::default(),
        }
    }

    pub fn with_synthesizer(mut self, synthesizer: Arc<dyn Synthesizer>) -> SessionEngine {
        self.synthesizer = synthesizer;
        self
    }

    pub fn with_config(mut self, config: EngineConfig) -> SessionEngine {
        self.config = config;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    fn event(&self, session_id: &str, kind: EventKind, payload: impl Serialize) -> SessionEvent {
        SessionEvent::new(self.clock.now(), session_id, kind, payload)
    }

    fn fold(state: Option<&SessionState>, events: Vec<SessionEvent>) -> Result<Transition, SessionError> {
        let state = match state {
            Some(s) => {
                let mut s = s.clone();
                for e in &events {
                    s.apply(e)?;
                }
                s
            }
            None => SessionState::replay(&events)?,
        };
        Ok(Transition { state, events })
    }

    fn present(&self, session_id: &str, story: &StoryConfig, cursor: &Cursor) -> Result<SessionEvent, SessionError> {
        let scene = story.scene(&cursor.scene_id).ok_or_else(|| bad_cursor(cursor))?;
        let turn = story
            .turn(&cursor.scene_id, &cursor.turn_id)
            .ok_or_else(|| bad_cursor(cursor))?;
        Ok(self.event(
            session_id,
            EventKind::TurnPresented,
            TurnPresentedPayload {
                scene_id: cursor.scene_id.clone(),
                turn_id: cursor.turn_id.clone(),
                prompt_index: cursor.prompt_index,
                image_ref: scene.image_ref.clone(),
                character_line: turn.character_line.clone(),
                expected_response: turn.expected_response.template.clone(),
                target_words: turn.candidate_words(),
                parent_tip: turn.parent_tip.clone(),
            },
        ))
    }

    pub fn start_session(
        &self,
        session_id: &str,
        child_id: &str,
        story: &StoryConfig,
        mode: Mode,
    ) -> Result<Transition, SessionError> {
        if !story.supports(mode) {
            return Err(SessionError::UnsupportedMode(mode));
        }
        let violations = validate_story(story, &self.lexicon);
        if !violations.is_empty() {
            return Err(SessionError::InvalidStory(violations));
        }
        let scene = &story.scenes[0];
        let cursor = Cursor {
            scene_id: scene.scene_id.clone(),
            turn_id: scene.turns[0].turn_id.clone(),
            prompt_index: 0,
        };
        let started = self.event(
            session_id,
            EventKind::SessionStarted,
            SessionStartedPayload {
                child_id: child_id.to_owned(),
                story_id: story.story_id.clone(),
                mode,
            },
        );
        let presented = self.present(session_id, story, &cursor)?;
        Self::fold(None, vec![started, presented])
    }

    fn check_active(state: &SessionState, story: &StoryConfig) -> Result<(), SessionError> {
        if state.status != SessionStatus::Active {
            return Err(SessionError::SessionNotActive(state.status));
        }
        if story.story_id != state.story_id {
            return Err(SessionError::StoryMismatch {
                story_id: story.story_id.clone(),
                expected: state.story_id.clone(),
            });
        }
        Ok(())
    }

    /// Scores against every candidate word of the turn and keeps the best:
    /// found before not found, then lower distance, then candidate order.
    fn score_turn(
        &self,
        turn: &Turn,
        mode: Mode,
        ctx: AttemptContext,
        phonemic: &str,
    ) -> Result<(AttemptScore, String), SessionError> {
        let hypothesis = tokenize_ipa(phonemic).map_err(ScoringError::from)?;
        let mut best: Option<(AttemptScore, String)> = None;
        for word in turn.candidate_words() {
            let target = ReferencePronunciation::from_lexicon(&word, &self.lexicon)?;
            let score = match mode {
                Mode::Word => self.scorer.score_word_attempt(&target, &hypothesis, ctx.clone())?,
                Mode::Sentence => self.scorer.score_sentence_attempt(&target, &hypothesis, ctx.clone())?,
            };
            let better = best.as_ref().is_none_or(|(b, _)| {
                (!score.target_found, score.distance_units) < (!b.target_found, b.distance_units)
            });
            if better {
                best = Some((score, word));
            }
        }
        best.ok_or_else(|| SessionError::Replay(format!("turn {} has no candidate words", turn.turn_id)))
    }

    fn next_after(story: &StoryConfig, cursor: &Cursor) -> Result<Next, SessionError> {
        if cursor.prompt_index + 1 < story.productions_per_turn {
            return Ok(Next::Prompt(Cursor {
                prompt_index: cursor.prompt_index + 1,
                ..cursor.clone()
            }));
        }
        let scene = story.scene(&cursor.scene_id).ok_or_else(|| bad_cursor(cursor))?;
        let idx = scene
            .turns
            .iter()
            .position(|t| t.turn_id == cursor.turn_id)
            .ok_or_else(|| bad_cursor(cursor))?;
        if let Some(t) = scene.turns.get(idx + 1) {
            return Ok(Next::Prompt(Cursor {
                scene_id: scene.scene_id.clone(),
                turn_id: t.turn_id.clone(),
                prompt_index: 0,
            }));
        }
        if scene.choice.is_some() {
            return Ok(Next::Choice);
        }
        match &scene.next {
            Some(id) => Ok(Next::Prompt(first_turn(story, id)?)),
            None => Ok(Next::End),
        }
    }

    /// Scores one production and moves the session on.
    ///
    /// Success (target found and band no worse than the story's success band)
    /// advances. A failure retries up to the retry cap (at most two), with a voice
    /// prompt before the first retry and the transcription before the second.
    /// After that the session proceeds and the record is flagged.
    pub fn submit_attempt(
        &self,
        state: &SessionState,
        story: &StoryConfig,
        audio_ref: AudioRef,
        transcript: &TranscriptionResult,
    ) -> Result<(Transition, AttemptResult), SessionError> {
        Self::check_active(state, story)?;
        if state.awaiting_choice {
            return Err(SessionError::ChoicePending);
        }
        let cursor = &state.cursor;
        let turn = story
            .turn(&cursor.scene_id, &cursor.turn_id)
            .ok_or_else(|| bad_cursor(cursor))?;
        let sid = state.session_id.as_str();
        let ts = self.clock.now();
        let ctx = AttemptContext {
            attempt_id: format!("{sid}-a{:04}", state.attempts.len() + 1),
            audio_ref: audio_ref.clone(),
            orthographic_transcript: transcript.orthographic.clone(),
            timestamp: ts,
        };
        let (score, word) = self.score_turn(turn, state.mode, ctx, &transcript.phonemic)?;
        let success = score.target_found && score.band <= story.success_band;
        let retry_index = state.retry_count;
        let outcome = if success {
            Outcome::Advance
        } else if retry_index < self.config.retry_cap.min(MAX_RETRIES) {
            Outcome::Retry
        } else {
            Outcome::ProceedFlagged
        };
        let next = match outcome {
            Outcome::Retry => None,
            _ => Some(Self::next_after(story, cursor)?),
        };
        let prompt_text = turn.expected_response.fill(&[word.as_str()]);
        let attempt_id = score.attempt_id.clone();
        let record = AttemptRecord {
            scene_id: cursor.scene_id.clone(),
            turn_id: cursor.turn_id.clone(),
            prompt_index: cursor.prompt_index,
            retry_index,
            feedback_given: Feedback::before_retry(retry_index),
            proceeded_after_failure: outcome == Outcome::ProceedFlagged,
            outcome,
            score: score.clone(),
        };
        let mut events = vec![SessionEvent::new(
            ts,
            sid,
            EventKind::AttemptScored,
            AttemptScoredPayload {
                child_id: state.child_id.clone(),
                prompt_text: prompt_text.clone(),
                awaiting_choice: matches!(next, Some(Next::Choice)),
                record,
            },
        )];
        let mut feedback = Feedback::None;
        match outcome {
            Outcome::Retry => {
                feedback = Feedback::before_retry(retry_index + 1);
                let cue = feedback == Feedback::TranscriptionCue;
                events.push(self.event(
                    sid,
                    EventKind::RetryPrompted,
                    RetryPromptedPayload {
                        attempt_id: attempt_id.clone(),
                        retry_count: retry_index + 1,
                        feedback,
                        transcription: cue.then(|| transcript.orthographic.clone()),
                        phonemic: cue.then(|| transcript.phonemic.clone()),
                    },
                ));
            }
            Outcome::Advance if state.mode == Mode::Word => {
                let readback = self
                    .synthesizer
                    .synthesize(&prompt_text, &self.config.voice_profile)
                    .map_err(|source| SessionError::AdapterFailure {
                        stage: "synthesis",
                        source,
                    })?;
                events.push(self.event(
                    sid,
                    EventKind::SentenceReadback,
                    SentenceReadbackPayload {
                        attempt_id: attempt_id.clone(),
                        sentence: prompt_text,
                        audio_ref: readback,
                    },
                ));
            }
            _ => {}
        }
        match next {
            Some(Next::Prompt(c)) => events.push(self.present(sid, story, &c)?),
            Some(Next::End) => events.push(self.completed(state, sid, &events)),
            Some(Next::Choice) | None => {}
        }
        let t = Self::fold(Some(state), events)?;
        Ok((
            t,
            AttemptResult {
                outcome,
                feedback,
                score,
            },
        ))
    }

    fn completed(&self, state: &SessionState, sid: &str, pending: &[SessionEvent]) -> SessionEvent {
        let new_records: Vec<AttemptRecord> = pending
            .iter()
            .filter_map(|e| e.decode::<AttemptScoredPayload>(EventKind::AttemptScored).ok())
            .map(|p| p.record)
            .collect();
        let all: Vec<&AttemptRecord> = state.attempts.iter().chain(new_records.iter()).collect();
        self.event(
            sid,
            EventKind::SessionCompleted,
            SessionCompletedPayload {
                attempts: all.len(),
                flagged_prompts: all.iter().filter(|a| a.proceeded_after_failure).count(),
            },
        )
    }

    /// Transcribes `audio_ref` and submits the result.
    pub fn submit_audio(
        &self,
        state: &SessionState,
        story: &StoryConfig,
        audio_ref: AudioRef,
        transcriber: &dyn Transcriber,
    ) -> Result<(Transition, AttemptResult), SessionError> {
        Self::check_active(state, story)?;
        let transcript = transcriber
            .transcribe(&audio_ref)
            .map_err(|source| SessionError::AdapterFailure {
                stage: "transcription",
                source,
            })?;
        self.submit_attempt(state, story, audio_ref, &transcript)
    }

    pub fn apply_choice(
        &self,
        state: &SessionState,
        story: &StoryConfig,
        option_id: &str,
    ) -> Result<Transition, SessionError> {
        Self::check_active(state, story)?;
        if !state.awaiting_choice {
            return Err(SessionError::NoPendingChoice);
        }
        let scene = story
            .scene(&state.cursor.scene_id)
            .ok_or_else(|| bad_cursor(&state.cursor))?;
        let choice = scene.choice.as_ref().ok_or(SessionError::NoPendingChoice)?;
        let option = choice
            .options
            .iter()
            .find(|o| o.option_id == option_id)
            .ok_or_else(|| SessionError::InvalidOption(option_id.to_owned()))?;
        let cursor = first_turn(story, &option.next_scene)?;
        let sid = state.session_id.as_str();
        let events = vec![
            self.event(
                sid,
                EventKind::ChoiceMade,
                ChoiceMadePayload {
                    scene_id: scene.scene_id.clone(),
                    option_id: option.option_id.clone(),
                    next_scene: option.next_scene.clone(),
                },
            ),
            self.present(sid, story, &cursor)?,
        ];
        Self::fold(Some(state), events)
    }

    /// Abandons an active session idle for at least the configured timeout.
    pub fn abandon_if_idle(&self, state: &SessionState, now: Timestamp) -> Option<Transition> {
        let idle = now.seconds_since(state.last_activity);
        if !state.is_active() || idle < self.config.inactivity_timeout_secs {
            return None;
        }
        let event = SessionEvent::new(
            now,
            &state.session_id,
            EventKind::SessionAbandoned,
            SessionAbandonedPayload { idle_seconds: idle },
        );
        Self::fold(Some(state), vec![event]).ok()
    }
}

fn bad_cursor(c: &Cursor) -> SessionError {
    SessionError::BadCursor {
        scene_id: c.scene_id.clone(),
        turn_id: c.turn_id.clone(),
    }
}

fn first_turn(story: &StoryConfig, scene_id: &str) -> Result<Cursor, SessionError> {
    let scene = story.scene(scene_id).ok_or_else(|| SessionError::BadCursor {
        scene_id: scene_id.to_owned(),
        turn_id: String::new(),
    })?;
    let turn = scene.turns.first().ok_or_else(|| SessionError::BadCursor {
        scene_id: scene_id.to_owned(),
        turn_id: String::new(),
    })?;
    Ok(Cursor {
        scene_id: scene_id.to_owned(),
        turn_id: turn.turn_id.clone(),
        prompt_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonology::QualityBand;
    use crate::story::{generate_story_from_template, GenerationSpec, TemplateLibrary};
    use crate::time::StepClock;

    fn setup() -> (SessionEngine, StoryConfig) {
        let lex = Arc::new(Lexicon::bundled());
        let spec = GenerationSpec {
            target_phonemes: vec!["l".into(), "r".into()],
            words: vec!["lake".into(), "lion".into(), "river".into(), "rocket".into()],
            template_id: "journey".into(),
            seed: 7,
        };
        let story = generate_story_from_template(&spec, &TemplateLibrary::bundled(), &lex).unwrap();
        let engine = SessionEngine::new(Scorer::bundled(), lex, Arc::new(StepClock::fixture()));
        (engine, story)
    }

    fn said(engine: &SessionEngine, word: &str) -> TranscriptionResult {
        let ipa = engine.lexicon().to_ipa(word).map(|s| s.to_string()).unwrap_or_default();
        TranscriptionResult {
            orthographic: word.into(),
            phonemic: ipa,
            engine_id: "test".into(),
            latency_ms: 0,
        }
    }

    fn silence() -> TranscriptionResult {
        TranscriptionResult {
            orthographic: String::new(),
            phonemic: String::new(),
            engine_id: "test".into(),
            latency_ms: 0,
        }
    }

    fn current_word(story: &StoryConfig, s: &SessionState) -> String {
        story.turn(&s.cursor.scene_id, &s.cursor.turn_id).unwrap().candidate_words()[0].clone()
    }

    fn audio() -> AudioRef {
        AudioRef::new("clip-1").unwrap()
    }

    #[test]
    fn start_emits_started_then_turn() {
        let (e, story) = setup();
        let t = e.start_session("s1", "kid", &story, Mode::Word).unwrap();
        let kinds: Vec<_> = t.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::SessionStarted, EventKind::TurnPresented]);
        assert_eq!(t.state.cursor.scene_id, "meadow");
        assert_eq!(t.state.cursor.turn_id, "t1");
        assert!(t.state.is_active());
    }

    #[test]
    fn unsupported_mode() {
        let (e, mut story) = setup();
        story.mode_support = vec![Mode::Word];
        assert!(matches!(
            e.start_session("s1", "kid", &story, Mode::Sentence),
            Err(SessionError::UnsupportedMode(Mode::Sentence))
        ));
    }

    #[test]
    fn perfect_attempt_advances_with_readback() {
        let (e, story) = setup();
        let s = e.start_session("s1", "kid", &story, Mode::Word).unwrap().state;
        let w = current_word(&story, &s);
        let (t, r) = e.submit_attempt(&s, &story, audio(), &said(&e, &w)).unwrap();
        assert_eq!(r.outcome, Outcome::Advance);
        assert_eq!(r.score.band, QualityBand::Excellent);
        assert_eq!(t.state.retry_count, 0);
        assert_eq!(t.state.cursor.turn_id, "t2");
        let kinds: Vec<_> = t.events.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [EventKind::AttemptScored, EventKind::SentenceReadback, EventKind::TurnPresented]
        );
    }

    #[test]
    fn retries_then_proceeds_flagged() {
        let (e, story) = setup();
        let mut s = e.start_session("s1", "kid", &story, Mode::Word).unwrap().state;
        let mut outcomes = Vec::new();
        for _ in 0..3 {
            let (t, r) = e.submit_attempt(&s, &story, audio(), &silence()).unwrap();
            outcomes.push((r.outcome, r.feedback));
            s = t.state;
        }
        assert_eq!(
            outcomes,
            [
                (Outcome::Retry, Feedback::VoicePrompt),
                (Outcome::Retry, Feedback::TranscriptionCue),
                (Outcome::ProceedFlagged, Feedback::None),
            ]
        );
        let idx: Vec<u8> = s.attempts.iter().map(|a| a.retry_index).collect();
        assert_eq!(idx, [0, 1, 2]);
        let fb: Vec<Feedback> = s.attempts.iter().map(|a| a.feedback_given).collect();
        assert_eq!(fb, [Feedback::None, Feedback::VoicePrompt, Feedback::TranscriptionCue]);
        assert!(s.attempts[2].proceeded_after_failure);
        assert_eq!(s.cursor.turn_id, "t2");
        assert_eq!(s.retry_count, 0);
    }

    #[test]
    fn choice_flow() {
        let (e, story) = setup();
        let mut s = e.start_session("s1", "kid", &story, Mode::Word).unwrap().state;
        assert!(matches!(
            e.apply_choice(&s, &story, "forest"),
            Err(SessionError::NoPendingChoice)
        ));
        for _ in 0..4 {
            let w = current_word(&story, &s);
            s = e.submit_attempt(&s, &story, audio(), &said(&e, &w)).unwrap().0.state;
        }
        assert!(s.awaiting_choice);
        assert!(matches!(
            e.submit_attempt(&s, &story, audio(), &silence()),
            Err(SessionError::ChoicePending)
        ));
        assert!(matches!(
            e.apply_choice(&s, &story, "moon"),
            Err(SessionError::InvalidOption(_))
        ));
        let t = e.apply_choice(&s, &story, "forest").unwrap();
        assert_eq!(t.state.cursor.scene_id, "forest");
        assert_eq!(t.events[0].kind, EventKind::ChoiceMade);
    }

    #[test]
    fn replay_matches_live_state_and_recordings() {
        let (e, story) = setup();
        let t0 = e.start_session("s1", "kid", &story, Mode::Sentence).unwrap();
        let mut log = t0.events.clone();
        let mut s = t0.state;
        let (t, _) = e.submit_attempt(&s, &story, audio(), &silence()).unwrap();
        log.extend(t.events);
        s = t.state;
        assert_eq!(SessionState::replay(&log).unwrap(), s);
        let id = s.attempts[0].score.attempt_id.clone();
        assert_eq!(s.replay_recording(&id).unwrap(), audio());
        assert!(matches!(s.replay_recording("nope"), Err(SessionError::UnknownAttempt(_))));
    }

    #[test]
    fn idle_sessions_are_abandoned() {
        let (e, story) = setup();
        let s = e.start_session("s1", "kid", &story, Mode::Word).unwrap().state;
        assert!(e.abandon_if_idle(&s, s.last_activity.plus_seconds(599)).is_none());
        let t = e.abandon_if_idle(&s, s.last_activity.plus_seconds(600)).unwrap();
        assert_eq!(t.state.status, SessionStatus::Abandoned);
        assert!(matches!(
            e.submit_attempt(&t.state, &story, audio(), &silence()),
            Err(SessionError::SessionNotActive(SessionStatus::Abandoned))
        ));
    }

    #[test]
    fn full_path_completes() {
        let (e, story) = setup();
        let mut s = e.start_session("s1", "kid", &story, Mode::Word).unwrap().state;
        let mut guard = 0;
        while s.is_active() {
            if s.awaiting_choice {
                s = e.apply_choice(&s, &story, "beach").unwrap().state;
                continue;
            }
            let w = current_word(&story, &s);
            s = e.submit_attempt(&s, &story, audio(), &said(&e, &w)).unwrap().0.state;
            guard += 1;
            assert!(guard < 100);
        }
        assert_eq!(s.status, SessionStatus::Completed);
        assert_eq!(s.attempts.len(), 12);
    }
}
