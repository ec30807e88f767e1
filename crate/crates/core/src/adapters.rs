//! Transcription and speech-synthesis adapters.
//!
//! Stub adapters are pure functions of their inputs and are what every test
//! uses. The stub transcriber reads sidecar files from a directory:
//!
//! ```text
//! <dir>/<audio_ref>.txt   orthographic transcript
//! <dir>/<audio_ref>.ipa   phonemic transcript (raw IPA)
//! ```
//!
//! Trailing newlines in sidecars are ignored. External adapters are thin HTTP
//! clients with a timeout and one retry.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::phonology::tokenize_ipa;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("{engine_id} failed: {cause}")]
    Failure { engine_id: String, cause: String },
    #[error("audio {0} cannot be resolved")]
    UnresolvableAudio(AudioRef),
    #[error("invalid audio reference {0:?}")]
    InvalidAudioRef(String),
    #[error("text to synthesize is empty")]
    EmptyText,
}

/// Opaque audio identifier. Restricted to `[A-Za-z0-9_.-]` so it maps to a file name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AudioRef(String);

impl AudioRef {
    pub fn new(s: impl Into<String>) -> Result<AudioRef, AdapterError> {
        let s = s.into();
        let ok = !s.is_empty()
            && s.len() <= 128
            && !s.starts_with('.')
            && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
        if ok {
            Ok(AudioRef(s))
        } else {
            Err(AdapterError::InvalidAudioRef(s))
        }
    }

    /// Content address for a blob: `aud-` + the first 24 hex digits of its SHA-256.
    pub fn for_content(bytes: &[u8]) -> AudioRef {
        AudioRef(format!("aud-{}", &hex_digest(bytes)[..24]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AudioRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for AudioRef {
    type Error = AdapterError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        AudioRef::new(s)
    }
}

impl From<AudioRef> for String {
    fn from(r: AudioRef) -> String {
        r.0
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptionResult {
    pub orthographic: String,
    /// Raw IPA; always tokenizable.
    pub phonemic: String,
    pub engine_id: String,
    pub latency_ms: u64,
}

pub trait Transcriber: Send + Sync {
    fn engine_id(&self) -> &str;
    fn transcribe(&self, audio: &AudioRef) -> Result<TranscriptionResult, AdapterError>;
}

pub trait Synthesizer: Send + Sync {
    fn synthesize(&self, text: &str, voice_profile: &str) -> Result<AudioRef, AdapterError>;
}

fn check_phonemic(engine_id: &str, phonemic: &str) -> Result<(), AdapterError> {
    tokenize_ipa(phonemic).map(|_| ()).map_err(|e| AdapterError::Failure {
        engine_id: engine_id.to_owned(),
        cause: format!("phonemic transcript is not valid IPA: {e}"),
    })
}

/// Looks transcripts up in sidecar files.
#[derive(Debug, Clone)]
pub struct StubTranscriber {
    dir: PathBuf,
}

impl StubTranscriber {
    pub const ENGINE_ID: &'static str = "stub-sidecar";

    pub fn new(dir: impl Into<PathBuf>) -> Self {
        StubTranscriber { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn sidecar(&self, audio: &AudioRef, ext: &str) -> Result<String, AdapterError> {
        let path = self.dir.join(format!("{}.{ext}", audio.as_str()));
        match std::fs::read_to_string(&path) {
            Ok(s) => Ok(s.trim_end_matches(['\n', '\r']).to_owned()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(AdapterError::UnresolvableAudio(audio.clone())),
            Err(e) => Err(AdapterError::Failure {
                engine_id: Self::ENGINE_ID.to_owned(),
                cause: format!("{}: {e}", path.display()),
            }),
        }
    }
}

impl Transcriber for StubTranscriber {
    fn engine_id(&self) -> &str {
        Self::ENGINE_ID
    }

    fn transcribe(&self, audio: &AudioRef) -> Result<TranscriptionResult, AdapterError> {
        let orthographic = self.sidecar(audio, "txt")?;
        let phonemic = self.sidecar(audio, "ipa")?;
        check_phonemic(Self::ENGINE_ID, &phonemic)?;
        Ok(TranscriptionResult {
            orthographic,
            phonemic,
            engine_id: Self::ENGINE_ID.to_owned(),
            latency_ms: 0,
        })
    }
}

/// Returns a content address of the text instead of audio.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubSynthesizer;

impl Synthesizer for StubSynthesizer {
    fn synthesize(&self, text: &str, voice_profile: &str) -> Result<AudioRef, AdapterError> {
        if text.trim().is_empty() {
            return Err(AdapterError::EmptyText);
        }
        let mut keyed = Vec::with_capacity(voice_profile.len() + text.len() + 1);
        keyed.extend_from_slice(voice_profile.as_bytes());
        keyed.push(0);
        keyed.extend_from_slice(text.as_bytes());
        Ok(AudioRef(format!("tts-{}", &hex_digest(&keyed)[..24])))
    }
}

/// Settings shared by the HTTP adapters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalEndpoint {
    pub url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(true)
        .build()
        .into()
}

fn with_retry<T>(engine_id: &str, mut call: impl FnMut() -> Result<T, String>) -> Result<T, AdapterError> {
    match call() {
        Ok(v) => Ok(v),
        Err(first) => {
            tracing::warn!(engine_id, error = %first, "adapter call failed, retrying once");
            call().map_err(|cause| AdapterError::Failure {
                engine_id: engine_id.to_owned(),
                cause,
            })
        }
    }
}

#[derive(Deserialize)]
struct RemoteTranscript {
    orthographic: String,
    phonemic: String,
}

/// Posts the stored audio blob (`<audio_dir>/<ref>.bin`) and expects
/// `{"orthographic": ..., "phonemic": ...}` back.
pub struct HttpTranscriber {
    endpoint: ExternalEndpoint,
    audio_dir: PathBuf,
    agent: ureq::Agent,
}

impl HttpTranscriber {
    pub const ENGINE_ID: &'static str = "http-transcriber";

    pub fn new(endpoint: ExternalEndpoint, audio_dir: impl Into<PathBuf>) -> Self {
        let agent = agent(endpoint.timeout_ms);
        HttpTranscriber {
            endpoint,
            audio_dir: audio_dir.into(),
            agent,
        }
    }
}

impl Transcriber for HttpTranscriber {
    fn engine_id(&self) -> &str {
        Self::ENGINE_ID
    }

    fn transcribe(&self, audio: &AudioRef) -> Result<TranscriptionResult, AdapterError> {
        let blob = std::fs::read(self.audio_dir.join(format!("{}.bin", audio.as_str())))
            .map_err(|_| AdapterError::UnresolvableAudio(audio.clone()))?;
        let started = Instant::now();
        let remote: RemoteTranscript = with_retry(Self::ENGINE_ID, || {
            let mut resp = self
                .agent
                .post(&self.endpoint.url)
                .header("content-type", "application/octet-stream")
                .send(&blob[..])
                .map_err(|e| e.to_string())?;
            let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
            serde_json::from_str(&body).map_err(|e| e.to_string())
        })?;
        check_phonemic(Self::ENGINE_ID, &remote.phonemic)?;
        Ok(TranscriptionResult {
            orthographic: remote.orthographic,
            phonemic: remote.phonemic,
            engine_id: Self::ENGINE_ID.to_owned(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

/// Posts `{"text", "voice"}` and stores the returned audio bytes content-addressed.
pub struct HttpSynthesizer {
    endpoint: ExternalEndpoint,
    audio_dir: PathBuf,
    agent: ureq::Agent,
}

impl HttpSynthesizer {
    pub const ENGINE_ID: &'static str = "http-synthesizer";

    pub fn new(endpoint: ExternalEndpoint, audio_dir: impl Into<PathBuf>) -> Self {
        let agent = agent(endpoint.timeout_ms);
        HttpSynthesizer {
            endpoint,
            audio_dir: audio_dir.into(),
            agent,
        }
    }
}

impl Synthesizer for HttpSynthesizer {
    fn synthesize(&self, text: &str, voice_profile: &str) -> Result<AudioRef, AdapterError> {
        if text.trim().is_empty() {
            return Err(AdapterError::EmptyText);
        }
        let body = serde_json::json!({ "text": text, "voice": voice_profile }).to_string();
        let bytes = with_retry(Self::ENGINE_ID, || {
            let mut resp = self
                .agent
                .post(&self.endpoint.url)
                .header("content-type", "application/json")
                .send(body.as_bytes())
                .map_err(|e| e.to_string())?;
            resp.body_mut().read_to_vec().map_err(|e| e.to_string())
        })?;
        let audio = AudioRef::for_content(&bytes);
        let path = self.audio_dir.join(format!("{}.bin", audio.as_str()));
        if !path.exists() {
            std::fs::write(&path, &bytes).map_err(|e| AdapterError::Failure {
                engine_id: Self::ENGINE_ID.to_owned(),
                cause: e.to_string(),
            })?;
        }
        Ok(audio)
    }
}
