//! Storage, configuration, the shared service layer and the HTTP API.

pub mod api;
pub mod config;
pub mod service;
pub mod store;

pub use config::{AdapterMode, Config, ConfigError};
pub use service::{
    score_word, AttemptAudio, PracticeCard, ScoreSummary, Service, ServiceError, SubmitResponse, TranscriptionCue,
    TurnView,
};
pub use store::{Store, StoreError};
