//! Practice-session state machine.
//!
//! Every operation produces a list of [`SessionEvent`]s and the new state is
//! the fold of those events over the old one. A session can therefore be
//! rebuilt from its event log alone (see [`SessionState::replay`]).

mod engine;
mod event;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::{AdapterError, AudioRef};
use crate::scoring::{AttemptScore, ScoringError};
use crate::story::{Mode, Violation};
use crate::time::Timestamp;

pub use engine::{AttemptResult, EngineConfig, Outcome, SessionEngine, Transition};
pub use event::{
    AttemptScoredPayload, ChoiceMadePayload, EventKind, RetryPromptedPayload, SentenceReadbackPayload,
    SessionAbandonedPayload, SessionCompletedPayload, SessionEvent, SessionStartedPayload, TurnPresentedPayload,
};

/// Retries allowed after the first attempt at a prompt.
pub const MAX_RETRIES: u8 = 2;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("story does not support {0} mode")]
    UnsupportedMode(Mode),
    #[error("story is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidStory(Vec<Violation>),
    #[error("session is {0:?}, not active")]
    SessionNotActive(SessionStatus),
    #[error("a choice must be made before the next attempt")]
    ChoicePending,
    #[error("no choice is pending")]
    NoPendingChoice,
    #[error("invalid option {0:?}")]
    InvalidOption(String),
    #[error("unknown attempt {0:?}")]
    UnknownAttempt(String),
    #[error("{stage} adapter failed: {source}")]
    AdapterFailure {
        stage: &'static str,
        #[source]
        source: AdapterError,
    },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("story {story_id} does not match session story {expected}")]
    StoryMismatch { story_id: String, expected: String },
    #[error("cursor {scene_id}/{turn_id} is not in the story")]
    BadCursor { scene_id: String, turn_id: String },
    #[error("replay: {0}")]
    Replay(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Completed,
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    None,
    VoicePrompt,
    TranscriptionCue,
}

impl Feedback {
    /// Feedback shown before attempt number `retry_index` of a prompt.
    pub fn before_retry(retry_index: u8) -> Feedback {
        match retry_index {
            0 => Feedback::None,
            1 => Feedback::VoicePrompt,
            _ => Feedback::TranscriptionCue,
        }
    }
}

/// Position in the story: a turn and which production of it is due.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cursor {
    pub scene_id: String,
    pub turn_id: String,
    #[serde(default)]
    pub prompt_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub scene_id: String,
    pub turn_id: String,
    pub prompt_index: u32,
    pub retry_index: u8,
    pub feedback_given: Feedback,
    pub proceeded_after_failure: bool,
    pub outcome: Outcome,
    pub score: AttemptScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub child_id: String,
    pub story_id: String,
    pub mode: Mode,
    pub cursor: Cursor,
    pub retry_count: u8,
    pub awaiting_choice: bool,
    pub attempts: Vec<AttemptRecord>,
    pub status: SessionStatus,
    pub started_at: Timestamp,
    pub last_activity: Timestamp,
}

impl SessionState {
    fn started(event: &SessionEvent) -> Result<SessionState, SessionError> {
        let p: SessionStartedPayload = event.decode(EventKind::SessionStarted)?;
        Ok(SessionState {
            session_id: event.session_id.clone(),
            child_id: p.child_id,
            story_id: p.story_id,
            mode: p.mode,
            cursor: Cursor {
                scene_id: String::new(),
                turn_id: String::new(),
                prompt_index: 0,
            },
            retry_count: 0,
            awaiting_choice: false,
            attempts: Vec::new(),
            status: SessionStatus::Active,
            started_at: event.ts,
            last_activity: event.ts,
        })
    }

    /// Applies one event. Events for another session, or after the session
    /// ended, are rejected.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), SessionError> {
        if event.session_id != self.session_id {
            return Err(SessionError::Replay(format!(
                "event for {} applied to {}",
                event.session_id, self.session_id
            )));
        }
        if self.status != SessionStatus::Active {
            return Err(SessionError::Replay(format!("{:?} after session ended", event.kind)));
        }
        match event.kind {
            EventKind::SessionStarted => {
                return Err(SessionError::Replay("duplicate session_started".into()));
            }
            EventKind::TurnPresented => {
                let p: TurnPresentedPayload = event.decode(event.kind)?;
                self.cursor = Cursor {
                    scene_id: p.scene_id,
                    turn_id: p.turn_id,
                    prompt_index: p.prompt_index,
                };
                self.retry_count = 0;
                self.awaiting_choice = false;
            }
            EventKind::AttemptScored => {
                let p: AttemptScoredPayload = event.decode(event.kind)?;
                self.retry_count = match p.record.outcome {
                    Outcome::Retry => p.record.retry_index + 1,
                    _ => 0,
                };
                self.awaiting_choice = p.awaiting_choice;
                self.attempts.push(p.record);
            }
            EventKind::ChoiceMade => {
                self.awaiting_choice = false;
            }
            EventKind::RetryPrompted | EventKind::SentenceReadback => {}
            EventKind::SessionCompleted => self.status = SessionStatus::Completed,
            EventKind::SessionAbandoned => self.status = SessionStatus::Abandoned,
        }
        self.last_activity = event.ts;
        Ok(())
    }

    /// Rebuilds a session from its full event log.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a SessionEvent>) -> Result<SessionState, SessionError> {
        let mut iter = events.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| SessionError::Replay("empty event log".into()))?;
        let mut state = SessionState::started(first)?;
        for e in iter {
            state.apply(e)?;
        }
        Ok(state)
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    /// Stored audio of one of this session's attempts.
    pub fn replay_recording(&self, attempt_id: &str) -> Result<AudioRef, SessionError> {
        self.attempts
            .iter()
            .find(|a| a.score.attempt_id == attempt_id)
            .map(|a| a.score.audio_ref.clone())
            .ok_or_else(|| SessionError::UnknownAttempt(attempt_id.to_owned()))
    }
}
