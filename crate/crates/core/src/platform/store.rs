//! File-based store.
//!
//! ```text
//! <root>/stories/<story_id>.json
//! <root>/sessions/<session_id>/events.log   one JSON event per line
//! <root>/audio/<audio_ref>.blob             uploaded audio, stored verbatim
//! <root>/audio/<audio_ref>.txt|.ipa         stub transcriber sidecars
//! <root>/lexicon/                           optional overrides of the bundled data
//! ```
//!
//! Event logs are only ever appended to, and each append is fsynced. A
//! partial last line left by a crash is ignored on read and cut off before
//! the next append.

use std::borrow::Cow;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, SystemTime};

use thiserror::Error;

use crate::adapters::AudioRef;
use crate::analytics::{AnalyticsError, EventSource};
use crate::lexicon::{Lexicon, LexiconError, PhoneCodeMap};
use crate::phonology::{FeatureTable, FeatureTableError};
use crate::session::SessionEvent;
use crate::story::{StoryConfig, StoryError};

const LOG_NAME: &str = "events.log";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("story {0} not found")]
    StoryNotFound(String),
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("audio {0} not found")]
    AudioNotFound(String),
    #[error("invalid identifier {0:?}")]
    InvalidId(String),
    #[error("{path} line {line}: {message}")]
    CorruptLog { path: String, line: usize, message: String },
    #[error(transparent)]
    Story(#[from] StoryError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Features(#[from] FeatureTableError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Identifiers become file names, so only `[A-Za-z0-9_.-]` is allowed.
pub fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidId(id.to_owned()))
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    allocate: Mutex<()>,
}

impl Store {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        for sub in ["stories", "sessions", "audio", "lexicon"] {
            let p = root.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        Ok(Store {
            root,
            allocate: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn audio_dir(&self) -> PathBuf {
        self.root.join("audio")
    }

    fn story_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("stories").join(format!("{id}.json")))
    }

    fn session_dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        check_id(id)?;
        Ok(self.root.join("sessions").join(id))
    }

    // ---- stories ----

    /// Writes atomically (temp file + rename).
    pub fn save_story(&self, story: &StoryConfig) -> Result<(), StoreError> {
        let path = self.story_path(&story.story_id)?;
        let tmp = path.with_extension("json.tmp");
        let mut body = story.to_json();
        body.push('\n');
        {
            let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
            f.write_all(body.as_bytes()).map_err(io_err(&tmp))?;
            f.sync_all().map_err(io_err(&tmp))?;
        }
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn load_story(&self, id: &str) -> Result<StoryConfig, StoreError> {
        let path = self.story_path(id)?;
        if !path.exists() {
            return Err(StoreError::StoryNotFound(id.to_owned()));
        }
        Ok(StoryConfig::load(&path)?)
    }

    /// Story ids in ascending order.
    pub fn list_stories(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("stories");
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".json").map(str::to_owned)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    // ---- sessions ----

    /// Reserves the next `sess-NNNNNN` id by creating its directory.
    pub fn allocate_session_id(&self) -> Result<String, StoreError> {
        let _guard = self.allocate.lock().unwrap_or_else(|p| p.into_inner());
        let mut n = self
            .list_sessions()?
            .iter()
            .filter_map(|id| id.strip_prefix("sess-")?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        loop {
            n += 1;
            let id = format!("sess-{n:06}");
            let dir = self.session_dir(&id)?;
            match fs::create_dir(&dir) {
                Ok(()) => return Ok(id),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io_err(&dir)(e)),
            }
        }
    }

    pub fn list_sessions(&self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("sessions");
        let mut ids: Vec<String> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().into_string().ok())
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn session_exists(&self, id: &str) -> bool {
        self.session_dir(id).is_ok_and(|d| d.join(LOG_NAME).exists())
    }

    pub fn log_path(&self, id: &str) -> Result<PathBuf, StoreError> {
        Ok(self.session_dir(id)?.join(LOG_NAME))
    }

    /// Appends events as whole lines and fsyncs. A torn tail from an earlier
    /// crash is truncated first so it never ends up mid-log.
    pub fn append_events(&self, session_id: &str, events: &[SessionEvent]) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        let dir = self.session_dir(session_id)?;
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let path = dir.join(LOG_NAME);
        let mut f = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        truncate_torn_tail(&mut f).map_err(io_err(&path))?;
        let mut buf = String::new();
        for e in events {
            buf.push_str(&e.to_line());
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))
    }

    /// Every complete event line of a session, in order.
    pub fn read_events(&self, session_id: &str) -> Result<Vec<SessionEvent>, StoreError> {
        let path = self.log_path(session_id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(StoreError::SessionNotFound(session_id.to_owned()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        parse_log(&text, &path)
    }

    /// Raw log bytes up to the last complete line.
    pub fn read_log_text(&self, session_id: &str) -> Result<String, StoreError> {
        let path = self.log_path(session_id)?;
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::SessionNotFound(session_id.to_owned()),
            _ => io_err(&path)(e),
        })?;
        let end = text.rfind('\n').map_or(0, |i| i + 1);
        Ok(text[..end].to_owned())
    }

    // ---- audio ----

    /// Stores a blob under its content address.
    pub fn put_audio(&self, bytes: &[u8]) -> Result<AudioRef, StoreError> {
        let r = AudioRef::for_content(bytes);
        let path = self.audio_dir().join(format!("{r}.blob"));
        if !path.exists() {
            let tmp = path.with_extension("blob.tmp");
            fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
            fs::rename(&tmp, &path).map_err(io_err(&path))?;
        }
        Ok(r)
    }

    /// A reference resolves if it has a blob or stub sidecars.
    pub fn has_audio(&self, r: &AudioRef) -> bool {
        let dir = self.audio_dir();
        ["blob", "txt", "ipa"]
            .iter()
            .any(|ext| dir.join(format!("{r}.{ext}")).exists())
    }

    pub fn read_audio(&self, r: &AudioRef) -> Result<Vec<u8>, StoreError> {
        let path = self.audio_dir().join(format!("{r}.blob"));
        fs::read(&path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => StoreError::AudioNotFound(r.to_string()),
            _ => io_err(&path)(e),
        })
    }

    /// Deletes blobs last modified more than `days` ago. Returns how many went.
    pub fn purge_audio(&self, days: u32) -> Result<usize, StoreError> {
        let dir = self.audio_dir();
        let cutoff = SystemTime::now() - Duration::from_secs(u64::from(days) * 86_400);
        let mut removed = 0;
        for entry in fs::read_dir(&dir).map_err(io_err(&dir))?.filter_map(|e| e.ok()) {
            let path = entry.path();
            if path.extension().is_none_or(|x| x != "blob") {
                continue;
            }
            let old = entry
                .metadata()
                .and_then(|m| m.modified())
                .is_ok_and(|t| t < cutoff);
            if old {
                fs::remove_file(&path).map_err(io_err(&path))?;
                removed += 1;
            }
        }
        Ok(removed)
    }

    // ---- lexicon resources ----

    /// Feature table from `lexicon/features.tsv`, else the bundled one.
    pub fn feature_table(&self) -> Result<FeatureTable, StoreError> {
        let p = self.root.join("lexicon/features.tsv");
        Ok(if p.exists() {
            FeatureTable::load(&p)?
        } else {
            FeatureTable::bundled()
        })
    }

    /// Lexicon from `lexicon/lexicon.dict` (+ `arpabet_ipa.tsv`, `word_ranks.txt`),
    /// each falling back to the bundled file.
    pub fn lexicon(&self) -> Result<Lexicon, StoreError> {
        let dir = self.root.join("lexicon");
        let dict = dir.join("lexicon.dict");
        if !dict.exists() {
            return Ok(Lexicon::bundled());
        }
        let codes_path = dir.join("arpabet_ipa.tsv");
        let codes = if codes_path.exists() {
            PhoneCodeMap::load(&codes_path)?
        } else {
            PhoneCodeMap::bundled()
        };
        let mut lex = Lexicon::load(&dict, &codes)?;
        let ranks = dir.join("word_ranks.txt");
        if ranks.exists() {
            lex.load_ranks(&ranks)?;
        }
        Ok(lex)
    }
}

impl EventSource for Store {
    fn events(&self) -> Result<Cow<'_, [SessionEvent]>, AnalyticsError> {
        let unavailable = |e: StoreError| AnalyticsError::StoreUnavailable(e.to_string());
        let mut all = Vec::new();
        for id in self.list_sessions().map_err(unavailable)? {
            match self.read_events(&id) {
                Ok(events) => all.extend(events),
                Err(StoreError::SessionNotFound(_)) => {}
                Err(e) => return Err(unavailable(e)),
            }
        }
        Ok(Cow::Owned(all))
    }
}

fn parse_log(text: &str, path: &Path) -> Result<Vec<SessionEvent>, StoreError> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..i],
        None => return Ok(Vec::new()),
    };
    complete
        .split('\n')
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            SessionEvent::from_line(l).map_err(|e| StoreError::CorruptLog {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn truncate_torn_tail(f: &mut File) -> io::Result<()> {
    let len = f.metadata()?.len();
    if len == 0 {
        return Ok(());
    }
    let mut last = [0u8; 1];
    f.seek(SeekFrom::Start(len - 1))?;
    f.read_exact(&mut last)?;
    if last[0] == b'\n' {
        return Ok(());
    }
    // Scan backwards for the last newline.
    let mut keep = 0u64;
    let mut pos = len;
    let mut chunk = vec![0u8; 4096];
    while pos > 0 {
        let start = pos.saturating_sub(chunk.len() as u64);
        let n = (pos - start) as usize;
        f.seek(SeekFrom::Start(start))?;
        f.read_exact(&mut chunk[..n])?;
        if let Some(i) = chunk[..n].iter().rposition(|&b| b == b'\n') {
            keep = start + i as u64 + 1;
            break;
        }
        pos = start;
    }
    f.set_len(keep)?;
    f.sync_data()
}
