//! Articulatory feature table.
//!
//! File format: UTF-8, tab-separated. Lines starting with `#` are comments; a
//! comment of the form `# version: <id>` names the table version. The first
//! non-comment line is a header: `phone` followed by the 24 feature names.
//! Every following line is one phone and 24 values from `+`, `-`, `0`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use super::ipa::Phone;

pub const FEATURE_COUNT: usize = 24;

const BUNDLED: &str = include_str!("../../data/features.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ternary {
    Minus,
    Zero,
    Plus,
}

impl Ternary {
    pub fn value(self) -> i8 {
        match self {
            Ternary::Minus => -1,
            Ternary::Zero => 0,
            Ternary::Plus => 1,
        }
    }

    fn parse(s: &str) -> Option<Ternary> {
        match s {
            "+" | "+1" | "1" => Some(Ternary::Plus),
            "-" | "−" | "-1" => Some(Ternary::Minus),
            "0" => Some(Ternary::Zero),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureVector([Ternary; FEATURE_COUNT]);

impl FeatureVector {
    pub fn new(values: [Ternary; FEATURE_COUNT]) -> Self {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[Ternary; FEATURE_COUNT] {
        &self.0
    }

    /// Number of positions where the two vectors disagree.
    pub fn mismatches(&self, other: &FeatureVector) -> u32 {
        self.0.iter().zip(other.0.iter()).filter(|(a, b)| a != b).count() as u32
    }
}

impl fmt::Debug for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self
            .0
            .iter()
            .map(|t| match t {
                Ternary::Minus => '-',
                Ternary::Zero => '0',
                Ternary::Plus => '+',
            })
            .collect();
        write!(f, "FeatureVector({s})")
    }
}

#[derive(Debug, Error)]
pub enum FeatureTableError {
    #[error("failed to read feature table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Immutable phone → feature vector map.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    version: String,
    feature_names: Vec<String>,
    entries: HashMap<String, FeatureVector>,
}

impl FeatureTable {
    /// The table shipped in `data/features.tsv`.
    pub fn bundled() -> FeatureTable {
        FeatureTable::parse(BUNDLED, "bundled").expect("bundled feature table is well-formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FeatureTable, FeatureTableError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let fallback = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "unversioned".to_owned());
        FeatureTable::parse(&text, &fallback)
    }

    /// Parses table text. `fallback_version` is used when no `# version:` comment exists.
    pub fn parse(text: &str, fallback_version: &str) -> Result<FeatureTable, FeatureTableError> {
        let mut version = None;
        let mut feature_names = None;
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_owned());
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != FEATURE_COUNT + 1 {
                return Err(FeatureTableError::Parse {
                    line: line_no,
                    message: format!("expected {} columns, found {}", FEATURE_COUNT + 1, cols.len()),
                });
            }
            if feature_names.is_none() {
                feature_names = Some(cols[1..].iter().map(|s| s.trim().to_owned()).collect());
                continue;
            }
            let symbol = cols[0].trim();
            let phone = Phone::new(symbol).ok_or_else(|| FeatureTableError::Parse {
                line: line_no,
                message: format!("{symbol:?} is not a single IPA segment"),
            })?;
            let mut values = [Ternary::Zero; FEATURE_COUNT];
            for (slot, col) in values.iter_mut().zip(&cols[1..]) {
                *slot = Ternary::parse(col.trim()).ok_or_else(|| FeatureTableError::Parse {
                    line: line_no,
                    message: format!("invalid feature value {col:?} for {symbol:?}"),
                })?;
            }
            if entries
                .insert(phone.as_str().to_owned(), FeatureVector(values))
                .is_some()
            {
                return Err(FeatureTableError::Parse {
                    line: line_no,
                    message: format!("duplicate phone {symbol:?}"),
                });
            }
        }
        let feature_names = feature_names.ok_or(FeatureTableError::Parse {
            line: 0,
            message: "missing header row".to_owned(),
        })?;
        Ok(FeatureTable {
            version: version.unwrap_or_else(|| fallback_version.to_owned()),
            feature_names,
            entries,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn get(&self, symbol: &str) -> Option<&FeatureVector> {
        self.entries.get(symbol)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.entries.contains_key(symbol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All phone symbols, sorted.
    pub fn symbols(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }
}
