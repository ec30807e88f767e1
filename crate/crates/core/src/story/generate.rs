use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    bombardment_count, phoneme_occurrences, Blank, Choice, Mode, ResponseTemplate, Scene, StoryConfig, Turn,
    SECONDS_PER_TURN,
};
use crate::lexicon::Lexicon;
use crate::phonology::QualityBand;

/// Minimum occurrences of each target phoneme in one scene's dialogue.
pub const BOMBARDMENT_PER_SCENE: u32 = 2;

const BUNDLED: &[&str] = &[
    include_str!("../../data/templates/journey.json"),
    include_str!("../../data/templates/picnic.json"),
];

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("no story template named {0:?}")]
    TemplateNotFound(String),
    #[error("template {template_id} needs at least {required} distinct words, got {given}")]
    InsufficientWords {
        template_id: String,
        required: usize,
        given: usize,
    },
    #[error("word {0:?} is not in the lexicon")]
    UnknownWord(String),
    #[error("word {0:?} contains none of the target phonemes")]
    WordLacksTargetPhoneme(String),
    #[error("no target phonemes given")]
    NoTargetPhonemes,
    #[error("template: {0}")]
    Template(String),
}

/// Inputs to the deterministic generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub target_phonemes: Vec<String>,
    pub words: Vec<String>,
    pub template_id: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryTemplate {
    pub template_id: String,
    pub title: String,
    pub min_words: usize,
    #[serde(default)]
    pub mode_support: Vec<Mode>,
    pub scenes: Vec<TemplateScene>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateScene {
    pub scene_id: String,
    pub image_ref: String,
    pub turns: Vec<TemplateTurn>,
    #[serde(default)]
    pub choice: Option<Choice>,
    #[serde(default)]
    pub next: Option<String>,
}

/// Lines use `{k}` for word slot `k` and `{phonemes}` for the target list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTurn {
    pub line: String,
    pub response: String,
    pub blank: usize,
    pub tip: String,
}

#[derive(Debug, Clone, Default)]
pub struct TemplateLibrary {
    templates: BTreeMap<String, StoryTemplate>,
}

impl TemplateLibrary {
    pub fn bundled() -> TemplateLibrary {
        let mut lib = TemplateLibrary::default();
        for text in BUNDLED {
            lib.insert(serde_json::from_str(text).expect("bundled template parses"));
        }
        lib
    }

    /// Bundled templates plus every `*.json` in `dir` (later ids win).
    pub fn with_dir(dir: impl AsRef<Path>) -> Result<TemplateLibrary, GenerationError> {
        let mut lib = TemplateLibrary::bundled();
        let entries = std::fs::read_dir(dir.as_ref()).map_err(|e| GenerationError::Template(e.to_string()))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| GenerationError::Template(e.to_string()))?;
            let t = serde_json::from_str(&text)
                .map_err(|e| GenerationError::Template(format!("{}: {e}", p.display())))?;
            lib.insert(t);
        }
        Ok(lib)
    }

    pub fn insert(&mut self, template: StoryTemplate) {
        self.templates.insert(template.template_id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Option<&StoryTemplate> {
        self.templates.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }
}

impl StoryTemplate {
    /// Turn count of the longest path from the first scene.
    fn longest_path_turns(&self) -> usize {
        fn walk(t: &StoryTemplate, id: &str, depth: usize) -> usize {
            let Some(s) = t.scenes.iter().find(|s| s.scene_id == id) else { return 0 };
            if depth > t.scenes.len() {
                return 0;
            }
            let succ: Vec<&str> = match (&s.choice, &s.next) {
                (Some(c), _) => c.options.iter().map(|o| o.next_scene.as_str()).collect(),
                (None, Some(n)) => vec![n.as_str()],
                _ => vec![],
            };
            s.turns.len() + succ.iter().map(|n| walk(t, n, depth + 1)).max().unwrap_or(0)
        }
        self.scenes.first().map_or(0, |s| walk(self, &s.scene_id, 0))
    }
}

/// Fills a committed template with the given words.
///
/// Words are shuffled with a ChaCha8 generator seeded from `spec.seed` and
/// dealt round-robin into the template's word slots; each blank accepts
/// every word dealt to its slot. Scenes whose dialogue mentions a target
/// phoneme fewer than twice get a repetition line appended to their last
/// turn. Identical inputs produce byte-identical stories.
pub fn generate_story_from_template(
    spec: &GenerationSpec,
    templates: &TemplateLibrary,
    lexicon: &Lexicon,
) -> Result<StoryConfig, GenerationError> {
    let template = templates
        .get(&spec.template_id)
        .ok_or_else(|| GenerationError::TemplateNotFound(spec.template_id.clone()))?;
    if spec.target_phonemes.is_empty() {
        return Err(GenerationError::NoTargetPhonemes);
    }
    let mut words: Vec<String> = Vec::new();
    for w in &spec.words {
        let w = w.trim().to_lowercase();
        if !w.is_empty() && !words.contains(&w) {
            words.push(w);
        }
    }
    if words.len() < template.min_words {
        return Err(GenerationError::InsufficientWords {
            template_id: template.template_id.clone(),
            required: template.min_words,
            given: words.len(),
        });
    }
    let mut pronunciations = BTreeMap::new();
    for w in &words {
        let ipa = lexicon.to_ipa(w).map_err(|_| GenerationError::UnknownWord(w.clone()))?;
        if !ipa.iter().any(|p| spec.target_phonemes.iter().any(|t| t == p.as_str())) {
            return Err(GenerationError::WordLacksTargetPhoneme(w.clone()));
        }
        pronunciations.insert(w.clone(), ipa);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    words.shuffle(&mut rng);
    let slots = template.min_words.max(1);
    let mut groups: Vec<Vec<String>> = vec![Vec::new(); slots];
    for (i, w) in words.iter().enumerate() {
        groups[i % slots].push(w.clone());
    }

    let phoneme_list = spec
        .target_phonemes
        .iter()
        .map(|p| format!("/{p}/"))
        .collect::<Vec<_>>()
        .join(" and ");

    let mut scenes = Vec::with_capacity(template.scenes.len());
    for ts in &template.scenes {
        let mut turns = Vec::with_capacity(ts.turns.len());
        for (i, tt) in ts.turns.iter().enumerate() {
            let group = groups
                .get(tt.blank)
                .ok_or_else(|| GenerationError::Template(format!("blank slot {} out of range", tt.blank)))?;
            turns.push(Turn {
                turn_id: format!("t{}", i + 1),
                character_line: fill_slots(&tt.line, &groups),
                expected_response: ResponseTemplate {
                    template: tt.response.clone(),
                    blanks: vec![Blank {
                        slot: 0,
                        allowed_words: group.clone(),
                    }],
                },
                parent_tip: tt.tip.replace("{phonemes}", &phoneme_list),
                bombardment_count: 0,
            });
        }
        top_up_bombardment(&mut turns, &spec.target_phonemes, &words, &pronunciations, lexicon);
        for t in &mut turns {
            t.bombardment_count = bombardment_count(&t.character_line, &spec.target_phonemes, lexicon);
        }
        scenes.push(Scene {
            scene_id: ts.scene_id.clone(),
            image_ref: ts.image_ref.clone(),
            turns,
            choice: ts.choice.clone(),
            next: ts.next.clone(),
        });
    }

    let turns = template.longest_path_turns() as f64;
    let mode_support = if template.mode_support.is_empty() {
        vec![Mode::Word, Mode::Sentence]
    } else {
        template.mode_support.clone()
    };
    let mut target_words = words.clone();
    target_words.sort();
    Ok(StoryConfig {
        story_id: format!("{}-{}", template.template_id, spec_digest(spec)),
        title: template.title.clone(),
        target_phonemes: spec.target_phonemes.clone(),
        target_words,
        mode_support,
        scenes,
        estimated_minutes: turns * f64::from(SECONDS_PER_TURN) / 60.0,
        success_band: QualityBand::Fair,
        productions_per_turn: 1,
    })
}

fn fill_slots(line: &str, groups: &[Vec<String>]) -> String {
    let mut out = line.to_owned();
    for (k, group) in groups.iter().enumerate() {
        out = out.replace(&format!("{{{k}}}"), &format!("[[{}]]", group[0]));
    }
    out
}

fn top_up_bombardment(
    turns: &mut [Turn],
    phonemes: &[String],
    words: &[String],
    pronunciations: &BTreeMap<String, crate::phonology::PhoneSeq>,
    lexicon: &Lexicon,
) {
    let Some(last) = turns.len().checked_sub(1) else { return };
    let mut totals: BTreeMap<String, u32> = phonemes.iter().map(|p| (p.clone(), 0)).collect();
    for t in turns.iter() {
        for (p, c) in phoneme_occurrences(&t.character_line, phonemes, lexicon) {
            *totals.entry(p).or_default() += c;
        }
    }
    let mut extra = Vec::new();
    for p in phonemes {
        let carriers: Vec<&String> = words
            .iter()
            .filter(|w| pronunciations[*w].iter().any(|ph| ph.as_str() == p))
            .collect();
        let mut i = 0;
        while totals[p] < BOMBARDMENT_PER_SCENE && !carriers.is_empty() {
            let w = carriers[i % carriers.len()];
            for (q, c) in phoneme_occurrences(w, phonemes, lexicon) {
                *totals.entry(q).or_default() += c;
            }
            extra.push(format!("[[{w}]]"));
            i += 1;
        }
    }
    if !extra.is_empty() {
        let line = &mut turns[last].character_line;
        line.push_str(" Say it with me: ");
        line.push_str(&extra.join(", "));
        line.push('!');
    }
}

fn spec_digest(spec: &GenerationSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    crate::adapters::hex_digest(canonical.as_bytes())[..8].to_owned()
}
