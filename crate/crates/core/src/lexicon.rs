//! Dictionary-based grapheme-to-phoneme conversion and target-word lookup.
//!
//! The dictionary uses the common two-column phone-code layout
//! (`WORD  P1 P2 ...`, alternates as `WORD(1)`), and phone codes are turned
//! into IPA through a separate mapping file so the conversion can be audited.
//! Word frequency ranks come from a plain wordlist: one word per line, rank =
//! position.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phonology::{normalize_rhotics, FeatureTable, Phone, PhoneSeq};

const BUNDLED_DICT: &str = include_str!("../data/lexicon.dict");
const BUNDLED_CODES: &str = include_str!("../data/arpabet_ipa.tsv");
const BUNDLED_RANKS: &str = include_str!("../data/word_ranks.txt");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown phone code {code:?}")]
    UnknownPhoneCode { code: String, line: usize },
    #[error("word {0:?} is not in the lexicon")]
    OutOfVocabulary(String),
    #[error("no lexicon word has /{phoneme}/ in {position} position")]
    NoMatch { phoneme: String, position: Position },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
}

fn read(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Phone code → IPA segments.
#[derive(Debug, Clone)]
pub struct PhoneCodeMap {
    codes: HashMap<String, Vec<Phone>>,
}

impl PhoneCodeMap {
    pub fn bundled() -> PhoneCodeMap {
        PhoneCodeMap::parse(BUNDLED_CODES).expect("bundled phone-code map is well-formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PhoneCodeMap, LexiconError> {
        PhoneCodeMap::parse(&read(path.as_ref())?)
    }

    pub fn parse(text: &str) -> Result<PhoneCodeMap, LexiconError> {
        let mut codes = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| LexiconError::Parse { line: idx + 1, message };
            let (code, ipa) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected CODE<TAB>IPA".to_owned()))?;
            let phones = ipa
                .split_whitespace()
                .map(|s| Phone::new(s).ok_or_else(|| parse_err(format!("{s:?} is not one IPA segment"))))
                .collect::<Result<Vec<_>, _>>()?;
            if phones.is_empty() {
                return Err(parse_err(format!("code {code:?} maps to nothing")));
            }
            codes.insert(code.trim().to_owned(), phones);
        }
        Ok(PhoneCodeMap { codes })
    }

    /// Looks up `code` exactly, then with its stress digit removed.
    pub fn convert(&self, code: &str) -> Option<&[Phone]> {
        if let Some(p) = self.codes.get(code) {
            return Some(p);
        }
        let bare = code.trim_end_matches(|c: char| c.is_ascii_digit());
        self.codes.get(bare).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub orthography: String,
    /// Primary pronunciation first.
    pub pronunciations: Vec<PhoneSeq>,
    pub frequency_rank: Option<u32>,
}

impl LexiconEntry {
    pub fn primary(&self) -> &PhoneSeq {
        &self.pronunciations[0]
    }
}

/// Immutable after construction.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

/// Loads a dictionary file using the bundled phone-code map.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    Lexicon::load(path, &PhoneCodeMap::bundled())
}

impl Lexicon {
    /// Bundled dictionary, code map and frequency ranks.
    pub fn bundled() -> Lexicon {
        let mut lex = Lexicon::parse(BUNDLED_DICT, &PhoneCodeMap::bundled()).expect("bundled lexicon is well-formed");
        lex.apply_ranks(BUNDLED_RANKS);
        lex
    }

    pub fn load(path: impl AsRef<Path>, codes: &PhoneCodeMap) -> Result<Lexicon, LexiconError> {
        Lexicon::parse(&read(path.as_ref())?, codes)
    }

    pub fn parse(text: &str, codes: &PhoneCodeMap) -> Result<Lexicon, LexiconError> {
        let mut entries: BTreeMap<String, LexiconEntry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with(";;;") || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().expect("non-empty line has a first token");
            let word = strip_variant(head).to_lowercase();
            if word.is_empty() {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: format!("empty headword in {head:?}"),
                });
            }
            let mut phones = Vec::new();
            for code in parts {
                let ipa = codes.convert(code).ok_or_else(|| LexiconError::UnknownPhoneCode {
                    code: code.to_owned(),
                    line: line_no,
                })?;
                phones.extend_from_slice(ipa);
            }
            if phones.is_empty() {
                return Err(LexiconError::Parse {
                    line: line_no,
                    message: format!("{head:?} has no pronunciation"),
                });
            }
            entries
                .entry(word.clone())
                .or_insert_with(|| LexiconEntry {
                    orthography: word,
                    pronunciations: Vec::new(),
                    frequency_rank: None,
                })
                .pronunciations
                .push(PhoneSeq::new(phones));
        }
        Ok(Lexicon { entries })
    }

    /// Assigns ranks from a wordlist; the first occurrence of a word wins.
    pub fn apply_ranks(&mut self, wordlist: &str) {
        let mut rank = 0u32;
        for raw in wordlist.lines() {
            let w = raw.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            rank += 1;
            if let Some(e) = self.entries.get_mut(&w.to_lowercase()) {
                e.frequency_rank.get_or_insert(rank);
            }
        }
    }

    pub fn load_ranks(&mut self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let text = read(path.as_ref())?;
        self.apply_ranks(&text);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(&word.trim().to_lowercase())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    /// Primary pronunciation with r-colored vowels merged.
    pub fn to_ipa(&self, word: &str) -> Result<PhoneSeq, LexiconError> {
        self.get(word)
            .map(|e| normalize_rhotics(e.primary()))
            .ok_or_else(|| LexiconError::OutOfVocabulary(word.to_owned()))
    }

    /// Up to `spec.count` words with the target phoneme in the requested
    /// position, by ascending frequency rank (unranked last), then spelling.
    pub fn recommend_words(&self, spec: &TargetSpec) -> Result<Vec<String>, LexiconError> {
        let mut hits: Vec<&LexiconEntry> = self
            .entries
            .values()
            .filter(|e| spec.position.matches(&normalize_rhotics(e.primary()), &spec.phoneme))
            .collect();
        if hits.is_empty() {
            return Err(LexiconError::NoMatch {
                phoneme: spec.phoneme.to_string(),
                position: spec.position,
            });
        }
        hits.sort_by(|a, b| {
            let ra = a.frequency_rank.unwrap_or(u32::MAX);
            let rb = b.frequency_rank.unwrap_or(u32::MAX);
            ra.cmp(&rb).then_with(|| a.orthography.cmp(&b.orthography))
        });
        Ok(hits
            .into_iter()
            .take(spec.count)
            .map(|e| e.orthography.clone())
            .collect())
    }
}

fn strip_variant(head: &str) -> &str {
    match head.find('(') {
        Some(i) if head.ends_with(')') => &head[..i],
        _ => head,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Initial,
    Final,
    Any,
}

impl Position {
    pub fn matches(self, seq: &PhoneSeq, phoneme: &Phone) -> bool {
        match self {
            Position::Initial => seq.phones().first() == Some(phoneme),
            Position::Final => seq.phones().last() == Some(phoneme),
            Position::Any => seq.iter().any(|p| p == phoneme),
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Initial => "initial",
            Position::Final => "final",
            Position::Any => "any",
        })
    }
}

impl FromStr for Position {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "initial" => Ok(Position::Initial),
            "final" => Ok(Position::Final),
            "any" => Ok(Position::Any),
            other => Err(LexiconError::InvalidTarget(format!("unknown position {other:?}"))),
        }
    }
}

/// Request for target-word recommendations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub phoneme: Phone,
    pub position: Position,
    pub count: usize,
}

impl TargetSpec {
    pub fn new(phoneme: &str, position: Position, count: usize, table: &FeatureTable) -> Result<Self, LexiconError> {
        if count == 0 {
            return Err(LexiconError::InvalidTarget("count must be at least 1".to_owned()));
        }
        let phone = Phone::new(phoneme)
            .filter(|p| table.contains(p.as_str()))
            .ok_or_else(|| LexiconError::InvalidTarget(format!("{phoneme:?} is not a known phone")))?;
        Ok(TargetSpec {
            phoneme: phone,
            position,
            count,
        })
    }
}
