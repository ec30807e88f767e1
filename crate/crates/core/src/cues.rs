//! Pictorial mouth-shape cues per phoneme.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

const BUNDLED: &str = include_str!("../data/mouth_cues.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MouthCue {
    pub phoneme: String,
    pub asset_ref: String,
    pub cue: String,
}

#[derive(Debug, Clone, Default)]
pub struct MouthCues {
    by_phoneme: BTreeMap<String, MouthCue>,
}

impl MouthCues {
    pub fn bundled() -> MouthCues {
        MouthCues::parse(BUNDLED)
    }

    /// `phoneme<TAB>asset_ref<TAB>cue` lines; `#` starts a comment, malformed lines are skipped.
    pub fn parse(text: &str) -> MouthCues {
        let by_phoneme = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| {
                let mut cols = l.split('\t');
                let phoneme = cols.next()?.trim().to_owned();
                let asset_ref = cols.next()?.trim().to_owned();
                let cue = cols.next()?.trim().to_owned();
                Some((
                    phoneme.clone(),
                    MouthCue {
                        phoneme,
                        asset_ref,
                        cue,
                    },
                ))
            })
            .collect();
        MouthCues { by_phoneme }
    }

    pub fn get(&self, phoneme: &str) -> Option<&MouthCue> {
        self.by_phoneme.get(phoneme)
    }

    /// Cues for the given phonemes in order, skipping unknowns and repeats.
    pub fn for_phonemes<'a>(&self, phonemes: impl IntoIterator<Item = &'a str>) -> Vec<MouthCue> {
        let mut out: Vec<MouthCue> = Vec::new();
        for p in phonemes {
            if let Some(c) = self.get(p) {
                if !out.iter().any(|o| o.phoneme == c.phoneme) {
                    out.push(c.clone());
                }
            }
        }
        out
    }
}
