use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{bombardment_count, marked_words, Mode, StoryConfig};
use crate::lexicon::Lexicon;
use crate::phonology::Phone;

/// One broken invariant of a story configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    #[error("story has no scenes")]
    NoScenes,
    #[error("story supports no modes")]
    NoModes,
    #[error("duplicate scene id {scene_id}")]
    DuplicateSceneId { scene_id: String },
    #[error("scene {scene_id} has no turns")]
    EmptyScene { scene_id: String },
    #[error("duplicate turn id {turn_id} in scene {scene_id}")]
    DuplicateTurnId { scene_id: String, turn_id: String },
    #[error("target phoneme {symbol:?} is not a single IPA segment")]
    InvalidTargetPhoneme { symbol: String },
    #[error("target word {word:?} is not in the lexicon")]
    WordNotInLexicon { word: String },
    #[error("target word {word:?} contains none of the target phonemes")]
    WordLacksTargetPhoneme { word: String },
    #[error("target word {word:?} is never used in a turn")]
    UnusedTargetWord { word: String },
    #[error("turn {scene_id}/{turn_id} has an empty parent tip")]
    EmptyParentTip { scene_id: String, turn_id: String },
    #[error("turn {scene_id}/{turn_id} needs a blank for word mode")]
    WordModeTurnWithoutBlank { scene_id: String, turn_id: String },
    #[error("turn {scene_id}/{turn_id} offers no target word to produce")]
    TurnWithoutTarget { scene_id: String, turn_id: String },
    #[error("blank in {scene_id}/{turn_id} references undeclared word {word:?}")]
    UndeclaredBlankWord {
        scene_id: String,
        turn_id: String,
        word: String,
    },
    #[error("line of {scene_id}/{turn_id} marks undeclared word {word:?}")]
    UndeclaredMarkupWord {
        scene_id: String,
        turn_id: String,
        word: String,
    },
    #[error("blank slot {slot} of {scene_id}/{turn_id} allows no words")]
    EmptyBlank {
        scene_id: String,
        turn_id: String,
        slot: usize,
    },
    #[error("blank slot {slot} repeated in {scene_id}/{turn_id}")]
    DuplicateBlankSlot {
        scene_id: String,
        turn_id: String,
        slot: usize,
    },
    #[error("blank slot {slot} of {scene_id}/{turn_id} exceeds the template's {available} blanks")]
    BlankSlotOutOfRange {
        scene_id: String,
        turn_id: String,
        slot: usize,
        available: usize,
    },
    #[error("turn {scene_id}/{turn_id} declares bombardment {declared} but its line has {counted}")]
    BombardmentMismatch {
        scene_id: String,
        turn_id: String,
        declared: u32,
        counted: u32,
    },
    #[error("choice in scene {scene_id} has fewer than two options")]
    TooFewOptions { scene_id: String },
    #[error("duplicate option id {option_id} in scene {scene_id}")]
    DuplicateOptionId { scene_id: String, option_id: String },
    #[error("option {option_id} of scene {scene_id} leads to missing scene {target}")]
    DanglingChoiceTarget {
        scene_id: String,
        option_id: String,
        target: String,
    },
    #[error("scene {scene_id} continues to missing scene {target}")]
    DanglingNextScene { scene_id: String, target: String },
    #[error("scene graph has a cycle through {scene_id}")]
    CyclicSceneGraph { scene_id: String },
    #[error("scene {scene_id} is unreachable from the first scene")]
    UnreachableScene { scene_id: String },
    #[error("productions per turn must be at least 1")]
    ZeroProductions,
}

/// Every invariant violation in `story`, in a stable order. Empty means valid.
pub fn validate_story(story: &StoryConfig, lexicon: &Lexicon) -> Vec<Violation> {
    let mut out = Vec::new();
    if story.scenes.is_empty() {
        out.push(Violation::NoScenes);
    }
    if story.mode_support.is_empty() {
        out.push(Violation::NoModes);
    }
    if story.productions_per_turn == 0 {
        out.push(Violation::ZeroProductions);
    }
    let declared: BTreeSet<String> = story.target_words.iter().map(|w| w.to_lowercase()).collect();

    for symbol in &story.target_phonemes {
        if Phone::new(symbol).is_none() {
            out.push(Violation::InvalidTargetPhoneme { symbol: symbol.clone() });
        }
    }
    for word in &story.target_words {
        match lexicon.to_ipa(word) {
            Err(_) => out.push(Violation::WordNotInLexicon { word: word.clone() }),
            Ok(ipa) => {
                if !ipa.iter().any(|p| story.target_phonemes.iter().any(|t| t == p.as_str())) {
                    out.push(Violation::WordLacksTargetPhoneme { word: word.clone() });
                }
            }
        }
    }

    let mut used = BTreeSet::new();
    let mut scene_ids = BTreeSet::new();
    for scene in &story.scenes {
        let sid = &scene.scene_id;
        if !scene_ids.insert(sid.as_str()) {
            out.push(Violation::DuplicateSceneId { scene_id: sid.clone() });
        }
        if scene.turns.is_empty() {
            out.push(Violation::EmptyScene { scene_id: sid.clone() });
        }
        let mut turn_ids = BTreeSet::new();
        for turn in &scene.turns {
            let tid = &turn.turn_id;
            let at = || (sid.clone(), tid.clone());
            if !turn_ids.insert(tid.as_str()) {
                let (scene_id, turn_id) = at();
                out.push(Violation::DuplicateTurnId { scene_id, turn_id });
            }
            if turn.parent_tip.trim().is_empty() {
                let (scene_id, turn_id) = at();
                out.push(Violation::EmptyParentTip { scene_id, turn_id });
            }
            let blanks = &turn.expected_response.blanks;
            if blanks.is_empty() && story.supports(Mode::Word) {
                let (scene_id, turn_id) = at();
                out.push(Violation::WordModeTurnWithoutBlank { scene_id, turn_id });
            }
            if turn.candidate_words().is_empty() {
                let (scene_id, turn_id) = at();
                out.push(Violation::TurnWithoutTarget { scene_id, turn_id });
            }
            let available = turn.expected_response.blank_count();
            let mut slots = BTreeSet::new();
            for blank in blanks {
                let (scene_id, turn_id) = at();
                if !slots.insert(blank.slot) {
                    out.push(Violation::DuplicateBlankSlot {
                        scene_id: scene_id.clone(),
                        turn_id: turn_id.clone(),
                        slot: blank.slot,
                    });
                }
                if blank.slot >= available {
                    out.push(Violation::BlankSlotOutOfRange {
                        scene_id: scene_id.clone(),
                        turn_id: turn_id.clone(),
                        slot: blank.slot,
                        available,
                    });
                }
                if blank.allowed_words.is_empty() {
                    out.push(Violation::EmptyBlank {
                        scene_id: scene_id.clone(),
                        turn_id: turn_id.clone(),
                        slot: blank.slot,
                    });
                }
                for w in &blank.allowed_words {
                    let w = w.to_lowercase();
                    if declared.contains(&w) {
                        used.insert(w);
                    } else {
                        out.push(Violation::UndeclaredBlankWord {
                            scene_id: scene_id.clone(),
                            turn_id: turn_id.clone(),
                            word: w,
                        });
                    }
                }
            }
            for w in marked_words(&turn.character_line) {
                if declared.contains(&w) {
                    used.insert(w);
                } else {
                    let (scene_id, turn_id) = at();
                    out.push(Violation::UndeclaredMarkupWord { scene_id, turn_id, word: w });
                }
            }
            let counted = bombardment_count(&turn.character_line, &story.target_phonemes, lexicon);
            if counted != turn.bombardment_count {
                let (scene_id, turn_id) = at();
                out.push(Violation::BombardmentMismatch {
                    scene_id,
                    turn_id,
                    declared: turn.bombardment_count,
                    counted,
                });
            }
        }
        if let Some(choice) = &scene.choice {
            if choice.options.len() < 2 {
                out.push(Violation::TooFewOptions { scene_id: sid.clone() });
            }
            let mut option_ids = BTreeSet::new();
            for opt in &choice.options {
                if !option_ids.insert(opt.option_id.as_str()) {
                    out.push(Violation::DuplicateOptionId {
                        scene_id: sid.clone(),
                        option_id: opt.option_id.clone(),
                    });
                }
            }
        }
    }

    for word in &declared {
        if !used.contains(word) {
            out.push(Violation::UnusedTargetWord { word: word.clone() });
        }
    }
    check_graph(story, &scene_ids, &mut out);
    out
}

fn check_graph(story: &StoryConfig, ids: &BTreeSet<&str>, out: &mut Vec<Violation>) {
    for scene in &story.scenes {
        for opt in scene.choice.iter().flat_map(|c| &c.options) {
            if !ids.contains(opt.next_scene.as_str()) {
                out.push(Violation::DanglingChoiceTarget {
                    scene_id: scene.scene_id.clone(),
                    option_id: opt.option_id.clone(),
                    target: opt.next_scene.clone(),
                });
            }
        }
        // a choice overrides `next`, but a dangling id is still a broken reference
        if let Some(next) = &scene.next {
            if !ids.contains(next.as_str()) {
                out.push(Violation::DanglingNextScene {
                    scene_id: scene.scene_id.clone(),
                    target: next.clone(),
                });
            }
        }
    }
    let Some(first) = story.scenes.first() else { return };

    let edges: BTreeMap<&str, Vec<&str>> = story
        .scenes
        .iter()
        .map(|s| {
            let succ = s.successors().into_iter().filter(|t| ids.contains(t)).collect();
            (s.scene_id.as_str(), succ)
        })
        .collect();

    // Iterative DFS with colors: 1 = on stack, 2 = done.
    let mut color: BTreeMap<&str, u8> = BTreeMap::new();
    let mut cyclic = BTreeSet::new();
    let mut stack = vec![(first.scene_id.as_str(), 0usize)];
    color.insert(first.scene_id.as_str(), 1);
    while let Some((node, i)) = stack.pop() {
        let succ = &edges[node];
        if i < succ.len() {
            stack.push((node, i + 1));
            let next = succ[i];
            match color.get(next) {
                None => {
                    color.insert(next, 1);
                    stack.push((next, 0));
                }
                Some(1) => {
                    cyclic.insert(next);
                }
                _ => {}
            }
        } else {
            color.insert(node, 2);
        }
    }
    for scene_id in cyclic {
        out.push(Violation::CyclicSceneGraph {
            scene_id: scene_id.to_owned(),
        });
    }
    for scene in &story.scenes {
        if !color.contains_key(scene.scene_id.as_str()) {
            out.push(Violation::UnreachableScene {
                scene_id: scene.scene_id.clone(),
            });
        }
    }
}
