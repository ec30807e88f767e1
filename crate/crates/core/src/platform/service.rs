use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{AdapterMode, Config, ConfigError};
use super::store::{Store, StoreError};
use crate::adapters::{
    AdapterError, AudioRef, HttpSynthesizer, HttpTranscriber, StubSynthesizer, StubTranscriber, Synthesizer,
    Transcriber,
};
use crate::analytics::{
    aggregate_child, export_report, recording_cards, AnalyticsError, CardFilter, ChildAggregate, ProgressReport,
    RecordingCard, TimeRange,
};
use crate::cues::{MouthCue, MouthCues};
use crate::lexicon::{Lexicon, LexiconError, Position, TargetSpec};
use crate::phonology::{BandThresholds, FeatureTable, IpaError, QualityBand};
use crate::scoring::{AttemptContext, AttemptScore, ReferencePronunciation, Scorer, ScoringError};
use crate::session::{
    Cursor, Feedback, Outcome, SessionEngine, SessionError, SessionState, SessionStatus, Transition,
};
use crate::story::{
    generate_story_from_template, marked_words, validate_story, Choice, GenerationError, GenerationSpec, Mode,
    ResponseTemplate, StoryConfig, TemplateLibrary, Violation,
};
use crate::time::{Clock, Timestamp};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("story is invalid ({} violations)", .0.len())]
    InvalidStory(Vec<Violation>),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    BadRequest(String),
}

impl ServiceError {
    /// Stable machine-readable code for error bodies.
    pub fn code(&self) -> &'static str {
        use ServiceError as E;
        match self {
            E::Store(StoreError::StoryNotFound(_)) => "StoryNotFound",
            E::Store(StoreError::SessionNotFound(_)) => "SessionNotFound",
            E::Store(StoreError::AudioNotFound(_)) => "AudioNotFound",
            E::Store(StoreError::InvalidId(_)) => "InvalidId",
            E::Store(_) => "StoreUnavailable",
            E::Session(e) => match e {
                SessionError::UnsupportedMode(_) => "UnsupportedMode",
                SessionError::InvalidStory(_) => "InvalidStory",
                SessionError::SessionNotActive(_) => "SessionNotActive",
                SessionError::ChoicePending => "ChoicePending",
                SessionError::NoPendingChoice => "NoPendingChoice",
                SessionError::InvalidOption(_) => "InvalidOption",
                SessionError::UnknownAttempt(_) => "UnknownAttempt",
                SessionError::AdapterFailure { .. } => "AdapterFailure",
                SessionError::Scoring(s) => scoring_code(s),
                SessionError::StoryMismatch { .. } | SessionError::BadCursor { .. } | SessionError::Replay(_) => {
                    "SessionCorrupt"
                }
            },
            E::InvalidStory(_) => "InvalidStory",
            E::Generation(g) => match g {
                GenerationError::TemplateNotFound(_) => "TemplateNotFound",
                GenerationError::InsufficientWords { .. } => "InsufficientWords",
                GenerationError::UnknownWord(_) => "OutOfVocabulary",
                GenerationError::WordLacksTargetPhoneme(_) => "WordLacksTargetPhoneme",
                GenerationError::NoTargetPhonemes => "BadRequest",
                GenerationError::Template(_) => "TemplateInvalid",
            },
            E::Lexicon(l) => match l {
                LexiconError::OutOfVocabulary(_) => "OutOfVocabulary",
                LexiconError::NoMatch { .. } => "NoMatch",
                LexiconError::InvalidTarget(_) => "InvalidTarget",
                _ => "LexiconUnavailable",
            },
            E::Scoring(s) => scoring_code(s),
            E::Analytics(_) => "StoreUnavailable",
            E::Adapter(AdapterError::InvalidAudioRef(_)) => "InvalidAudioRef",
            E::Adapter(AdapterError::EmptyText) => "BadRequest",
            E::Adapter(_) => "AdapterFailure",
            E::Config(_) => "ConfigInvalid",
            E::BadRequest(_) => "BadRequest",
        }
    }

    /// HTTP status: 4xx for contract violations, 5xx for adapter and store failures.
    pub fn status(&self) -> u16 {
        match self.code() {
            "StoryNotFound" | "SessionNotFound" | "AudioNotFound" | "UnknownAttempt" | "TemplateNotFound"
            | "OutOfVocabulary" | "NoMatch" => 404,
            "SessionNotActive" | "ChoicePending" | "NoPendingChoice" => 409,
            "InvalidStory" | "UnsupportedMode" | "InvalidOption" | "InsufficientWords" | "WordLacksTargetPhoneme"
            | "UnknownSymbol" | "InvalidIpa" | "EmptyReference" | "InvalidTarget" => 422,
            "BadRequest" | "InvalidId" | "InvalidAudioRef" => 400,
            "AdapterFailure" => 502,
            _ => 500,
        }
    }

    pub fn violations(&self) -> Option<&[Violation]> {
        match self {
            ServiceError::InvalidStory(v) | ServiceError::Session(SessionError::InvalidStory(v)) => Some(v),
            _ => None,
        }
    }
}

fn scoring_code(e: &ScoringError) -> &'static str {
    match e {
        ScoringError::Ipa(IpaError::UnknownSymbol { .. }) => "UnknownSymbol",
        ScoringError::Ipa(_) => "InvalidIpa",
        ScoringError::Distance(_) => "UnknownSymbol",
        ScoringError::Lexicon(LexiconError::OutOfVocabulary(_)) => "OutOfVocabulary",
        ScoringError::EmptyReference(_) => "EmptyReference",
        _ => "BadRequest",
    }
}

/// Ad-hoc score of one word production, shared by the CLI and the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub word: String,
    pub reference: String,
    pub hypothesis: String,
    pub distance: f64,
    pub distance_units: u32,
    pub pfer: f64,
    pub band: QualityBand,
    pub target_found: bool,
}

pub fn score_word(scorer: &Scorer, lexicon: &Lexicon, word: &str, hypothesis_ipa: &str) -> Result<ScoreSummary, ServiceError> {
    let target = ReferencePronunciation::from_lexicon(word, lexicon)?;
    let hyp = crate::phonology::clean_transcription(hypothesis_ipa).map_err(ScoringError::from)?;
    let ctx = AttemptContext {
        attempt_id: "adhoc".into(),
        audio_ref: AudioRef::new("adhoc").expect("literal is valid"),
        orthographic_transcript: word.into(),
        timestamp: Timestamp::from_millis(0),
    };
    let s = scorer.score_word_attempt(&target, &hyp, ctx)?;
    Ok(ScoreSummary {
        word: s.target.orthography.clone(),
        reference: s.target.phonemes.to_string(),
        hypothesis: s.hypothesis.to_string(),
        distance: s.distance,
        distance_units: s.distance_units,
        pfer: s.pfer,
        band: s.band,
        target_found: s.target_found,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub session_id: String,
    pub status: SessionStatus,
    pub mode: Mode,
    pub cursor: Cursor,
    pub retry_count: u8,
    pub awaiting_choice: bool,
    pub image_ref: String,
    pub character_line: String,
    pub highlighted_words: Vec<String>,
    pub expected_response: ResponseTemplate,
    pub target_words: Vec<String>,
    pub parent_tip: String,
    pub bombardment_count: u32,
    pub mouth_cues: Vec<MouthCue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<Choice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptionCue {
    pub orthographic: String,
    pub phonemic: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub outcome: Outcome,
    pub feedback: Feedback,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voice_prompt_audio: Option<AudioRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcription_cue: Option<TranscriptionCue>,
    pub score: AttemptScore,
    pub status: SessionStatus,
    pub cursor: Cursor,
    pub retry_count: u8,
    pub awaiting_choice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PracticeCard {
    pub word: String,
    pub ipa: Vec<String>,
    pub variants: Vec<String>,
    pub mouth_cues: Vec<MouthCue>,
    pub model_audio: AudioRef,
}

/// How an attempt's audio arrives.
#[derive(Debug, Clone)]
pub enum AttemptAudio {
    Blob(Vec<u8>),
    Ref(AudioRef),
}

/// Stub synthesis that leaves a `<ref>.txt` sidecar holding the text, so
/// every synthesized ref recorded in a log resolves in the store.
struct SidecarSynthesizer {
    dir: std::path::PathBuf,
}

impl Synthesizer for SidecarSynthesizer {
    fn synthesize(&self, text: &str, voice_profile: &str) -> Result<AudioRef, AdapterError> {
        let r = StubSynthesizer.synthesize(text, voice_profile)?;
        let path = self.dir.join(format!("{r}.txt"));
        if !path.exists() {
            std::fs::write(&path, text).map_err(|e| AdapterError::Failure {
                engine_id: "stub-synthesizer".into(),
                cause: e.to_string(),
            })?;
        }
        Ok(r)
    }
}

type Slot = Arc<Mutex<Option<SessionState>>>;

/// Everything the API and CLI need, bound to one store.
///
/// Session mutations are serialized per session id; different sessions
/// proceed in parallel.
pub struct Service {
    store: Store,
    scorer: Scorer,
    lexicon: Arc<Lexicon>,
    engine: SessionEngine,
    transcriber: Arc<dyn Transcriber>,
    synthesizer: Arc<dyn Synthesizer>,
    templates: TemplateLibrary,
    cues: MouthCues,
    voice_profile: String,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<String, Slot>>,
}

impl Service {
    pub fn open(config: &Config, clock: Arc<dyn Clock>) -> Result<Service, ServiceError> {
        config.validate()?;
        let store = Store::open(&config.data_dir)?;
        let table = Arc::new(store.feature_table()?);
        let lexicon = Arc::new(store.lexicon()?);
        let (transcriber, synthesizer): (Arc<dyn Transcriber>, Arc<dyn Synthesizer>) = match config.adapters {
            AdapterMode::Stub => (
                Arc::new(StubTranscriber::new(store.audio_dir())),
                Arc::new(SidecarSynthesizer {
                    dir: store.audio_dir(),
                }),
            ),
            AdapterMode::External => {
                let t = config
                    .transcriber
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("missing transcriber endpoint".into()))?;
                let synth: Arc<dyn Synthesizer> = match &config.synthesizer {
                    Some(s) => Arc::new(HttpSynthesizer::new(s.clone(), store.audio_dir())),
                    None => Arc::new(StubSynthesizer),
                };
                (Arc::new(HttpTranscriber::new(t, store.audio_dir())), synth)
            }
        };
        let scorer = Scorer::new(Arc::clone(&table)).with_thresholds(config.thresholds);
        let engine = SessionEngine::new(scorer.clone(), Arc::clone(&lexicon), Arc::clone(&clock))
            .with_synthesizer(Arc::clone(&synthesizer))
            .with_config(config.engine_config());
        let templates_dir = store.root().join("templates");
        let templates = if templates_dir.is_dir() {
            TemplateLibrary::with_dir(&templates_dir)?
        } else {
            TemplateLibrary::bundled()
        };
        Ok(Service {
            store,
            scorer,
            lexicon,
            engine,
            transcriber,
            synthesizer,
            templates,
            cues: MouthCues::bundled(),
            voice_profile: config.voice_profile.clone(),
            clock,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    pub fn table(&self) -> &FeatureTable {
        self.scorer.table()
    }

    pub fn thresholds(&self) -> &BandThresholds {
        self.scorer.thresholds()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    // ---- stories ----

    pub fn list_stories(&self) -> Result<Vec<StoryConfig>, ServiceError> {
        self.store
            .list_stories()?
            .iter()
            .map(|id| Ok(self.store.load_story(id)?))
            .collect()
    }

    pub fn get_story(&self, id: &str) -> Result<StoryConfig, ServiceError> {
        Ok(self.store.load_story(id)?)
    }

    pub fn validate(&self, story: &StoryConfig) -> Vec<Violation> {
        validate_story(story, &self.lexicon)
    }

    /// Validates and saves; invalid stories are rejected with their violations.
    pub fn create_story(&self, story: StoryConfig) -> Result<StoryConfig, ServiceError> {
        super::store::check_id(&story.story_id)?;
        let v = self.validate(&story);
        if !v.is_empty() {
            return Err(ServiceError::InvalidStory(v));
        }
        self.store.save_story(&story)?;
        Ok(story)
    }

    pub fn generate_story(&self, spec: &GenerationSpec) -> Result<StoryConfig, ServiceError> {
        let story = generate_story_from_template(spec, &self.templates, &self.lexicon)?;
        self.create_story(story)
    }

    // ---- sessions ----

    fn slot(&self, id: &str) -> Slot {
        let mut map = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        Arc::clone(map.entry(id.to_owned()).or_default())
    }

    fn load_into(&self, id: &str, slot: &mut Option<SessionState>) -> Result<SessionState, ServiceError> {
        if let Some(s) = slot.as_ref() {
            return Ok(s.clone());
        }
        let events = self.store.read_events(id)?;
        let state = SessionState::replay(&events)?;
        *slot = Some(state.clone());
        Ok(state)
    }

    /// Runs one mutation under the session's lock and persists its events
    /// before updating the cached state.
    fn mutate<T>(
        &self,
        id: &str,
        op: impl FnOnce(&SessionState, &StoryConfig) -> Result<(Transition, T), ServiceError>,
    ) -> Result<(SessionState, T), ServiceError> {
        super::store::check_id(id)?;
        let slot = self.slot(id);
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        let state = self.load_into(id, &mut guard)?;
        let story = self.store.load_story(&state.story_id)?;
        let (t, out) = op(&state, &story)?;
        if let Err(e) = self.store.append_events(id, &t.events) {
            *guard = None;
            return Err(e.into());
        }
        *guard = Some(t.state.clone());
        Ok((t.state, out))
    }

    pub fn create_session(&self, child_id: &str, story_id: &str, mode: Mode) -> Result<SessionState, ServiceError> {
        super::store::check_id(child_id)?;
        let story = self.store.load_story(story_id)?;
        if !story.supports(mode) {
            return Err(SessionError::UnsupportedMode(mode).into());
        }
        let id = self.store.allocate_session_id()?;
        let result = self
            .engine
            .start_session(&id, child_id, &story, mode)
            .map_err(ServiceError::from)
            .and_then(|t| {
                self.store.append_events(&id, &t.events)?;
                Ok(t.state)
            });
        match result {
            Ok(state) => {
                *self.slot(&id).lock().unwrap_or_else(|p| p.into_inner()) = Some(state.clone());
                Ok(state)
            }
            Err(e) => {
                if let Ok(dir) = self.store.log_path(&id) {
                    if let Some(parent) = dir.parent() {
                        let _ = std::fs::remove_dir_all(parent);
                    }
                }
                Err(e)
            }
        }
    }

    pub fn session(&self, id: &str) -> Result<SessionState, ServiceError> {
        super::store::check_id(id)?;
        let slot = self.slot(id);
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        self.load_into(id, &mut guard)
    }

    pub fn session_log(&self, id: &str) -> Result<String, ServiceError> {
        Ok(self.store.read_log_text(id)?)
    }

    pub fn current_turn(&self, id: &str) -> Result<TurnView, ServiceError> {
        let state = self.session(id)?;
        let story = self.store.load_story(&state.story_id)?;
        let c = &state.cursor;
        let scene = story.scene(&c.scene_id).ok_or_else(|| SessionError::BadCursor {
            scene_id: c.scene_id.clone(),
            turn_id: c.turn_id.clone(),
        })?;
        let turn = story.turn(&c.scene_id, &c.turn_id).ok_or_else(|| SessionError::BadCursor {
            scene_id: c.scene_id.clone(),
            turn_id: c.turn_id.clone(),
        })?;
        Ok(TurnView {
            session_id: state.session_id.clone(),
            status: state.status,
            mode: state.mode,
            cursor: state.cursor.clone(),
            retry_count: state.retry_count,
            awaiting_choice: state.awaiting_choice,
            image_ref: scene.image_ref.clone(),
            character_line: turn.character_line.clone(),
            highlighted_words: marked_words(&turn.character_line),
            expected_response: turn.expected_response.clone(),
            target_words: turn.candidate_words(),
            parent_tip: turn.parent_tip.clone(),
            bombardment_count: turn.bombardment_count,
            mouth_cues: self.cues.for_phonemes(story.target_phonemes.iter().map(String::as_str)),
            choice: state.awaiting_choice.then(|| scene.choice.clone()).flatten(),
        })
    }

    pub fn submit_attempt(&self, id: &str, audio: AttemptAudio) -> Result<SubmitResponse, ServiceError> {
        let audio_ref = match audio {
            AttemptAudio::Blob(bytes) => self.store.put_audio(&bytes)?,
            AttemptAudio::Ref(r) => {
                if !self.store.has_audio(&r) {
                    return Err(StoreError::AudioNotFound(r.to_string()).into());
                }
                r
            }
        };
        let (state, (result, transcript)) = self.mutate(id, |state, story| {
            if !state.is_active() {
                return Err(SessionError::SessionNotActive(state.status).into());
            }
            if state.awaiting_choice {
                return Err(SessionError::ChoicePending.into());
            }
            let transcript =
                self.transcriber
                    .transcribe(&audio_ref)
                    .map_err(|source| SessionError::AdapterFailure {
                        stage: "transcription",
                        source,
                    })?;
            let (t, r) = self.engine.submit_attempt(state, story, audio_ref.clone(), &transcript)?;
            Ok((t, (r, transcript)))
        })?;
        let voice_prompt_audio = match result.feedback {
            Feedback::VoicePrompt => {
                let text = format!("Good try! Listen and say it again: {}.", result.score.target.orthography);
                Some(self.synthesizer.synthesize(&text, &self.voice_profile)?)
            }
            _ => None,
        };
        let transcription_cue = (result.feedback == Feedback::TranscriptionCue).then(|| TranscriptionCue {
            orthographic: transcript.orthographic.clone(),
            phonemic: transcript.phonemic.clone(),
        });
        Ok(SubmitResponse {
            outcome: result.outcome,
            feedback: result.feedback,
            voice_prompt_audio,
            transcription_cue,
            score: result.score,
            status: state.status,
            cursor: state.cursor,
            retry_count: state.retry_count,
            awaiting_choice: state.awaiting_choice,
        })
    }

    pub fn apply_choice(&self, id: &str, option_id: &str) -> Result<SessionState, ServiceError> {
        let (state, ()) = self.mutate(id, |state, story| Ok((self.engine.apply_choice(state, story, option_id)?, ())))?;
        Ok(state)
    }

    pub fn replay_recording(&self, id: &str, attempt_id: &str) -> Result<AudioRef, ServiceError> {
        Ok(self.session(id)?.replay_recording(attempt_id)?)
    }

    /// Abandons every active session idle since before `now` minus the timeout.
    pub fn sweep_idle(&self, now: Timestamp) -> Result<Vec<String>, ServiceError> {
        let mut abandoned = Vec::new();
        for id in self.store.list_sessions()? {
            if !self.store.session_exists(&id) {
                continue;
            }
            let slot = self.slot(&id);
            let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
            let state = self.load_into(&id, &mut guard)?;
            if let Some(t) = self.engine.abandon_if_idle(&state, now) {
                self.store.append_events(&id, &t.events)?;
                *guard = Some(t.state);
                abandoned.push(id);
            }
        }
        Ok(abandoned)
    }

    // ---- words ----

    pub fn practice_card(&self, word: &str) -> Result<PracticeCard, ServiceError> {
        let entry = self
            .lexicon
            .get(word)
            .ok_or_else(|| LexiconError::OutOfVocabulary(word.to_owned()))?;
        let ipa = self.lexicon.to_ipa(word)?;
        let symbols: Vec<String> = ipa.symbols().into_iter().map(str::to_owned).collect();
        Ok(PracticeCard {
            word: entry.orthography.clone(),
            mouth_cues: self.cues.for_phonemes(symbols.iter().map(String::as_str)),
            ipa: symbols,
            variants: entry.pronunciations.iter().skip(1).map(|p| p.to_string()).collect(),
            model_audio: self.synthesizer.synthesize(&entry.orthography, &self.voice_profile)?,
        })
    }

    pub fn recommend(&self, phoneme: &str, position: Position, count: usize) -> Result<Vec<String>, ServiceError> {
        let spec = TargetSpec::new(phoneme, position, count, self.table())?;
        Ok(self.lexicon.recommend_words(&spec)?)
    }

    pub fn score(&self, word: &str, hypothesis_ipa: &str) -> Result<ScoreSummary, ServiceError> {
        score_word(&self.scorer, &self.lexicon, word, hypothesis_ipa)
    }

    // ---- analytics ----

    pub fn dashboard(&self, child_id: &str, range: TimeRange) -> Result<ChildAggregate, ServiceError> {
        Ok(aggregate_child(child_id, range, &self.store, self.thresholds())?)
    }

    pub fn cards(&self, child_id: &str, filter: &CardFilter, range: TimeRange) -> Result<Vec<RecordingCard>, ServiceError> {
        Ok(recording_cards(child_id, filter, range, &self.store, self.thresholds())?)
    }

    pub fn export(&self, child_id: &str, range: TimeRange) -> Result<ProgressReport, ServiceError> {
        Ok(export_report(child_id, range, &self.store, self.thresholds())?)
    }
}
