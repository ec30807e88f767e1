//! IPA segmentation and transcription cleaning.
//!
//! A segment is one base letter plus the diacritics and modifier letters that
//! follow it. Two bases joined by a tie bar form one segment. Suprasegmental
//! marks (stress, length, tone letters, syllable breaks, boundaries) never
//! end up inside a segment: the tokenizer drops them, and cleaning removes
//! the remaining diacritics as well.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Combining double inverted breve (tie bar above) and its below variant.
const TIE_BARS: [char; 2] = ['\u{0361}', '\u{035C}'];

/// Rhotic hook; the only diacritic that survives cleaning.
const RHOTIC_HOOK: char = '\u{02DE}';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IpaError {
    #[error("unknown IPA symbol {symbol:?} at character {index}")]
    UnknownSymbol { index: usize, symbol: char },
    #[error("diacritic {symbol:?} at character {index} has no base to attach to")]
    DanglingModifier { index: usize, symbol: char },
    #[error("tie bar at character {index} is not followed by a base letter")]
    DanglingTieBar { index: usize },
}

impl IpaError {
    pub fn index(&self) -> usize {
        match *self {
            IpaError::UnknownSymbol { index, .. }
            | IpaError::DanglingModifier { index, .. }
            | IpaError::DanglingTieBar { index } => index,
        }
    }
}

/// One IPA segment, e.g. `t`, `tʰ`, `t͡ʃ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phone(String);

impl Phone {
    /// Builds a phone from a symbol that is already a single clean segment.
    ///
    /// Returns `None` when `symbol` does not tokenize to exactly one segment.
    pub fn new(symbol: &str) -> Option<Phone> {
        let seq = tokenize_ipa(symbol).ok()?;
        match seq.0.as_slice() {
            [one] if one.0 == symbol => Some(one.clone()),
            _ => None,
        }
    }

    pub(crate) fn from_trusted(symbol: impl Into<String>) -> Phone {
        Phone(symbol.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Phone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Phone {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Ordered sequence of segments. Empty means nothing was produced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhoneSeq(pub(crate) Vec<Phone>);

impl PhoneSeq {
    pub fn new(phones: Vec<Phone>) -> Self {
        PhoneSeq(phones)
    }

    pub fn empty() -> Self {
        PhoneSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn phones(&self) -> &[Phone] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Phone> {
        self.0.iter()
    }

    pub fn symbols(&self) -> Vec<&str> {
        self.0.iter().map(Phone::as_str).collect()
    }

    /// Sub-sequence `[start, start + len)`.
    pub fn window(&self, start: usize, len: usize) -> PhoneSeq {
        PhoneSeq(self.0[start..start + len].to_vec())
    }

    /// Removes every diacritic except the rhotic hook from each segment.
    pub fn cleaned(&self) -> PhoneSeq {
        PhoneSeq(self.0.iter().map(clean_phone).collect())
    }
}

impl fmt::Display for PhoneSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            f.write_str(p.as_str())?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a PhoneSeq {
    type Item = &'a Phone;
    type IntoIter = std::slice::Iter<'a, Phone>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl FromIterator<Phone> for PhoneSeq {
    fn from_iter<I: IntoIterator<Item = Phone>>(iter: I) -> Self {
        PhoneSeq(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Base,
    /// Combining diacritic or spacing modifier letter; attaches to the previous base.
    Modifier,
    TieBar,
    /// Stress, length, tone letters, breaks, boundaries, brackets, whitespace.
    Strippable,
    Unknown,
}

fn classify(c: char) -> CharClass {
    if TIE_BARS.contains(&c) {
        return CharClass::TieBar;
    }
    if is_strippable(c) {
        return CharClass::Strippable;
    }
    if is_base(c) {
        return CharClass::Base;
    }
    if is_modifier(c) {
        return CharClass::Modifier;
    }
    CharClass::Unknown
}

fn is_strippable(c: char) -> bool {
    matches!(
        c,
        'ˈ' | 'ˌ' | 'ː' | 'ˑ' | '.' | '|' | '‖' | '‿' | '˥' | '˦' | '˧' | '˨' | '˩' | '↗' | '↘'
            | '/' | '[' | ']'
            // combining tone diacritics: grave, acute, circumflex, macron, caron, double acute/grave
            | '\u{0300}' | '\u{0301}' | '\u{0302}' | '\u{0304}' | '\u{030B}' | '\u{030C}' | '\u{030F}'
            // combining breve (extra-short)
            | '\u{0306}'
    ) || c.is_whitespace()
}

fn is_base(c: char) -> bool {
    c.is_ascii_lowercase()
        || ('\u{0250}'..='\u{02AF}').contains(&c)
        || matches!(
            c,
            'æ' | 'ç' | 'ð' | 'ø' | 'œ' | 'ħ' | 'ŋ' | 'β' | 'θ' | 'χ' | 'ɸ' | 'ǀ' | 'ǁ' | 'ǂ' | 'ǃ'
                | 'ⱱ'
        )
}

fn is_modifier(c: char) -> bool {
    ('\u{0300}'..='\u{036F}').contains(&c)
        || ('\u{1DC0}'..='\u{1DFF}').contains(&c)
        || matches!(
            c,
            'ʰ' | 'ʱ' | 'ʲ' | 'ʷ' | 'ˠ' | 'ˤ' | 'ⁿ' | 'ˡ' | 'ʼ' | '˞' | 'ʴ' | 'ᵊ' | '˭' | '˔' | '˕'
                | '˖' | '˗' | '˟' | 'ᶿ' | 'ˣ' | 'ᵝ'
        )
}

/// Splits raw IPA into segments, dropping suprasegmental marks.
///
/// Diacritics and modifier letters stay attached to the preceding base. The
/// concatenation of the output symbols equals the input with strippable marks
/// removed.
pub fn tokenize_ipa(raw: &str) -> Result<PhoneSeq, IpaError> {
    let mut out: Vec<String> = Vec::new();
    let mut pending_tie: Option<usize> = None;
    for (index, c) in raw.chars().enumerate() {
        match classify(c) {
            CharClass::Strippable => {
                if let Some(index) = pending_tie {
                    return Err(IpaError::DanglingTieBar { index });
                }
            }
            CharClass::Base => {
                if pending_tie.take().is_some() {
                    // the tie bar is already appended to the previous segment
                    out.last_mut().expect("tie bar follows a base").push(c);
                } else {
                    out.push(c.to_string());
                }
            }
            CharClass::Modifier => {
                if pending_tie.is_some() {
                    return Err(IpaError::DanglingModifier { index, symbol: c });
                }
                match out.last_mut() {
                    Some(seg) => seg.push(c),
                    None => return Err(IpaError::DanglingModifier { index, symbol: c }),
                }
            }
            CharClass::TieBar => {
                if pending_tie.is_some() {
                    return Err(IpaError::DanglingTieBar { index });
                }
                match out.last_mut() {
                    Some(seg) => seg.push(c),
                    None => return Err(IpaError::DanglingTieBar { index }),
                }
                pending_tie = Some(index);
            }
            CharClass::Unknown => return Err(IpaError::UnknownSymbol { index, symbol: c }),
        }
    }
    if let Some(index) = pending_tie {
        return Err(IpaError::DanglingTieBar { index });
    }
    Ok(PhoneSeq(out.into_iter().map(Phone).collect()))
}

/// Tokenizes and removes every mark except rhoticity.
///
/// Stress, length, tone, syllable breaks and word boundaries go in
/// tokenization; aspiration, devoicing, nasalization and other diacritics go
/// here. `ə˞`/`ɜ˞` become `ɚ`/`ɝ`. `ɡ` (U+0261) is folded to ASCII `g`.
pub fn clean_transcription(raw: &str) -> Result<PhoneSeq, IpaError> {
    Ok(tokenize_ipa(raw)?.cleaned())
}

fn clean_phone(phone: &Phone) -> Phone {
    let mut out = String::with_capacity(phone.0.len());
    let mut rhotic = false;
    for c in phone.0.chars() {
        match classify(c) {
            CharClass::Base => out.push(if c == 'ɡ' { 'g' } else { c }),
            CharClass::TieBar => out.push('\u{0361}'),
            CharClass::Modifier if c == RHOTIC_HOOK || c == 'ʴ' => rhotic = true,
            _ => {}
        }
    }
    if rhotic {
        match out.as_str() {
            "ə" => out = "ɚ".to_owned(),
            "ɜ" => out = "ɝ".to_owned(),
            // other hooked vowels carry no separate entry; drop the hook
            _ => {}
        }
    }
    Phone(out)
}

/// Input with every strippable mark removed; the tokenizer's round-trip target.
pub fn strip_marks(raw: &str) -> String {
    raw.chars()
        .filter(|&c| classify(c) != CharClass::Strippable)
        .collect()
}
