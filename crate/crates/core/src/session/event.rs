use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{AttemptRecord, Feedback, SessionError};
use crate::adapters::AudioRef;
use crate::story::Mode;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStarted,
    TurnPresented,
    AttemptScored,
    RetryPrompted,
    ChoiceMade,
    SentenceReadback,
    SessionCompleted,
    SessionAbandoned,
}

/// One line of a session's event log. Field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub ts: Timestamp,
    pub session_id: String,
    pub kind: EventKind,
    pub payload: serde_json::Value,
}

impl SessionEvent {
    pub fn new(ts: Timestamp, session_id: &str, kind: EventKind, payload: impl Serialize) -> SessionEvent {
        SessionEvent {
            ts,
            session_id: session_id.to_owned(),
            kind,
            payload: serde_json::to_value(payload).expect("payload serializes"),
        }
    }

    /// Typed payload, checking the kind first.
    pub fn decode<T: DeserializeOwned>(&self, expected: EventKind) -> Result<T, SessionError> {
        if self.kind != expected {
            return Err(SessionError::Replay(format!("expected {expected:?}, found {:?}", self.kind)));
        }
        serde_json::from_value(self.payload.clone())
            .map_err(|e| SessionError::Replay(format!("{:?} payload: {e}", self.kind)))
    }

    /// Single-line JSON, no trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    pub fn from_line(line: &str) -> Result<SessionEvent, serde_json::Error> {
        serde_json::from_str(line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStartedPayload {
    pub child_id: String,
    pub story_id: String,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnPresentedPayload {
    pub scene_id: String,
    pub turn_id: String,
    pub prompt_index: u32,
    pub image_ref: String,
    pub character_line: String,
    pub expected_response: String,
    pub target_words: Vec<String>,
    pub parent_tip: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptScoredPayload {
    pub child_id: String,
    /// Sentence the child was prompted to say, with the best-matching word filled in.
    pub prompt_text: String,
    pub awaiting_choice: bool,
    #[serde(flatten)]
    pub record: AttemptRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPromptedPayload {
    pub attempt_id: String,
    pub retry_count: u8,
    pub feedback: Feedback,
    /// Only for the transcription cue: what the transcriber heard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phonemic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceMadePayload {
    pub scene_id: String,
    pub option_id: String,
    pub next_scene: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceReadbackPayload {
    pub attempt_id: String,
    pub sentence: String,
    pub audio_ref: AudioRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCompletedPayload {
    pub attempts: usize,
    pub flagged_prompts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionAbandonedPayload {
    pub idle_seconds: i64,
}
