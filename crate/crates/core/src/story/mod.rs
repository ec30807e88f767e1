//! Story configurations: scenes of dialogue turns with madlib responses,
//! branching choices and parent tips.
//!
//! Stories are plain JSON documents (see `docs/story-format.md`). Unknown
//! fields are ignored on load.

mod generate;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicon;
use crate::phonology::QualityBand;
use crate::scoring::word_tokens;

pub use generate::{generate_story_from_template, GenerationError, GenerationSpec, StoryTemplate, TemplateLibrary};
pub use validate::{validate_story, Violation};

/// Placeholder for one blank in a response template.
pub const BLANK_MARK: &str = "___";

/// Seconds budgeted per dialogue turn when estimating story length.
pub const SECONDS_PER_TURN: u32 = 40;

#[derive(Debug, Error)]
pub enum StoryError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("story document: {0}")]
    Format(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Word,
    Sentence,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Word => "word",
            Mode::Sentence => "sentence",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mode {0:?} (expected word or sentence)")]
pub struct UnknownMode(pub String);

impl FromStr for Mode {
    type Err = UnknownMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "word" => Ok(Mode::Word),
            "sentence" => Ok(Mode::Sentence),
            other => Err(UnknownMode(other.to_owned())),
        }
    }
}

fn default_minutes() -> f64 {
    8.0
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Word, Mode::Sentence]
}

fn default_success_band() -> QualityBand {
    QualityBand::Fair
}

fn default_productions() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryConfig {
    pub story_id: String,
    pub title: String,
    pub target_phonemes: Vec<String>,
    pub target_words: Vec<String>,
    #[serde(default = "default_modes")]
    pub mode_support: Vec<Mode>,
    pub scenes: Vec<Scene>,
    #[serde(default = "default_minutes")]
    pub estimated_minutes: f64,
    /// Worst band that still counts as a successful production.
    #[serde(default = "default_success_band")]
    pub success_band: QualityBand,
    /// Target-word productions elicited per turn.
    #[serde(default = "default_productions")]
    pub productions_per_turn: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub image_ref: String,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<Choice>,
    /// Scene that follows when there is no choice; absent means the story ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: String,
    /// Dialogue text; target words are marked as `[[word]]`.
    pub character_line: String,
    pub expected_response: ResponseTemplate,
    pub parent_tip: String,
    pub bombardment_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseTemplate {
    /// Sentence with one `___` per blank.
    pub template: String,
    #[serde(default)]
    pub blanks: Vec<Blank>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blank {
    pub slot: usize,
    pub allowed_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub prompt: String,
    pub options: Vec<ChoiceOption>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceOption {
    pub option_id: String,
    pub label: String,
    pub next_scene: String,
}

impl StoryConfig {
    pub fn from_json(text: &str) -> Result<StoryConfig, StoryError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<StoryConfig, StoryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| StoryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        StoryConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("story serializes")
    }

    pub fn scene(&self, scene_id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    pub fn turn(&self, scene_id: &str, turn_id: &str) -> Option<&Turn> {
        self.scene(scene_id)?.turns.iter().find(|t| t.turn_id == turn_id)
    }

    pub fn supports(&self, mode: Mode) -> bool {
        self.mode_support.contains(&mode)
    }
}

impl Scene {
    /// Scene ids this scene can lead to.
    pub fn successors(&self) -> Vec<&str> {
        match (&self.choice, &self.next) {
            (Some(c), _) => c.options.iter().map(|o| o.next_scene.as_str()).collect(),
            (None, Some(n)) => vec![n.as_str()],
            (None, None) => Vec::new(),
        }
    }
}

impl Turn {
    /// Words the child may produce for this turn.
    ///
    /// The lowest-slot blank supplies the candidates; a turn without blanks
    /// falls back to the words marked in its character line.
    pub fn candidate_words(&self) -> Vec<String> {
        match self.expected_response.blanks.iter().min_by_key(|b| b.slot) {
            Some(b) => b.allowed_words.iter().map(|w| w.to_lowercase()).collect(),
            None => marked_words(&self.character_line),
        }
    }

    /// Character line with markup brackets removed.
    pub fn plain_line(&self) -> String {
        plain_text(&self.character_line)
    }
}

impl ResponseTemplate {
    pub fn blank_count(&self) -> usize {
        self.template.matches(BLANK_MARK).count()
    }

    /// Template with each blank replaced by the given word, in slot order.
    pub fn fill(&self, words: &[&str]) -> String {
        let mut out = String::new();
        let mut parts = self.template.split(BLANK_MARK);
        out.push_str(parts.next().unwrap_or_default());
        for (i, part) in parts.enumerate() {
            out.push_str(words.get(i).copied().unwrap_or(BLANK_MARK));
            out.push_str(part);
        }
        out
    }
}

/// Lowercased words inside `[[...]]` markup, in order of appearance.
pub fn marked_words(line: &str) -> Vec<String> {
    let mut words = Vec::new();
    let mut rest = line;
    while let Some(open) = rest.find("[[") {
        let after = &rest[open + 2..];
        let Some(close) = after.find("]]") else { break };
        let w = after[..close].trim();
        if !w.is_empty() {
            words.push(w.to_lowercase());
        }
        rest = &after[close + 2..];
    }
    words
}

pub fn plain_text(line: &str) -> String {
    line.replace("[[", "").replace("]]", "")
}

/// Occurrences of each target phoneme across the dictionary pronunciations
/// of the line's words. Words missing from the lexicon contribute nothing.
pub fn phoneme_occurrences(line: &str, phonemes: &[String], lexicon: &Lexicon) -> BTreeMap<String, u32> {
    let mut counts: BTreeMap<String, u32> = phonemes.iter().map(|p| (p.clone(), 0)).collect();
    for token in word_tokens(&plain_text(line)) {
        let Ok(ipa) = lexicon.to_ipa(&token) else { continue };
        for phone in ipa.iter() {
            if let Some(c) = counts.get_mut(phone.as_str()) {
                *c += 1;
            }
        }
    }
    counts
}

/// Total target-phoneme occurrences in a line.
pub fn bombardment_count(line: &str, phonemes: &[String], lexicon: &Lexicon) -> u32 {
    phoneme_occurrences(line, phonemes, lexicon).values().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markup() {
        let line = "Look at the [[Lake]] and the [[river]]!";
        assert_eq!(marked_words(line), ["lake", "river"]);
        assert_eq!(plain_text(line), "Look at the Lake and the river!");
        assert!(marked_words("no [[close").is_empty());
    }

    #[test]
    fn fill_template() {
        let t = ResponseTemplate {
            template: "I see a ___ by the ___.".into(),
            blanks: vec![],
        };
        assert_eq!(t.blank_count(), 2);
        assert_eq!(t.fill(&["lion", "lake"]), "I see a lion by the lake.");
        assert_eq!(t.fill(&["lion"]), "I see a lion by the ___.");
    }

    #[test]
    fn counts_phonemes_through_lexicon() {
        let lex = Lexicon::bundled();
        let targets = vec!["l".to_string(), "r".to_string()];
        let c = phoneme_occurrences("The [[lion]] rows to the lake, zzz!", &targets, &lex);
        assert_eq!(c["l"], 2);
        assert_eq!(bombardment_count("The lion sees a lake", &targets, &lex), 2);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("Sentence".parse::<Mode>().unwrap(), Mode::Sentence);
        assert!("both".parse::<Mode>().is_err());
    }
}
