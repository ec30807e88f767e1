use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{BandHistogram, Scorer, ScoringError};
use crate::phonology::{band_of, prepare, FeatureDistance, QualityBand};

/// One row of batch input: `word,reference_ipa,hypothesis_ipa`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchInput {
    pub word: String,
    pub reference_ipa: String,
    pub hypothesis_ipa: String,
}

impl BatchInput {
    pub fn new(word: &str, reference_ipa: &str, hypothesis_ipa: &str) -> BatchInput {
        BatchInput {
            word: word.into(),
            reference_ipa: reference_ipa.into(),
            hypothesis_ipa: hypothesis_ipa.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub index: usize,
    pub word: String,
    pub reference_ipa: String,
    pub hypothesis_ipa: String,
    #[serde(default)]
    pub distance: Option<f64>,
    #[serde(default)]
    pub distance_units: Option<u32>,
    #[serde(default)]
    pub pfer: Option<f64>,
    #[serde(default)]
    pub band: Option<QualityBand>,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub items: usize,
    pub scored: usize,
    pub failed: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    pub histogram: BandHistogram,
}

/// Per-item results in input order plus a summary over the scored items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub feature_table_version: String,
    pub rows: Vec<BatchRow>,
    pub summary: BatchSummary,
}

impl BatchReport {
    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.distance).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl Scorer {
    fn score_pair(&self, item: &BatchInput) -> Result<(FeatureDistance, f64, QualityBand), ScoringError> {
        let reference = prepare(&item.reference_ipa)?;
        if reference.is_empty() {
            return Err(ScoringError::EmptyReference(item.word.clone()));
        }
        let hypothesis = prepare(&item.hypothesis_ipa)?;
        let d = self.distance(&reference, &hypothesis)?;
        let band = band_of(d.value(), self.thresholds())?;
        Ok((d, d.value() / reference.len() as f64, band))
    }

    /// Scores every pair; failures are recorded on their row and excluded
    /// from the summary statistics.
    pub fn batch_score(&self, items: &[BatchInput]) -> BatchReport {
        let mut histogram = BandHistogram::default();
        let mut rows = Vec::with_capacity(items.len());
        for (index, item) in items.iter().enumerate() {
            let mut row = BatchRow {
                index,
                word: item.word.clone(),
                reference_ipa: item.reference_ipa.clone(),
                hypothesis_ipa: item.hypothesis_ipa.clone(),
                distance: None,
                distance_units: None,
                pfer: None,
                band: None,
                error: None,
            };
            match self.score_pair(item) {
                Ok((d, pfer, band)) => {
                    histogram.add(band);
                    row.distance = Some(d.value());
                    row.distance_units = Some(d.units());
                    row.pfer = Some(pfer);
                    row.band = Some(band);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            rows.push(row);
        }
        let values: Vec<f64> = rows.iter().filter_map(|r| r.distance).collect();
        let (mean, std_dev) = mean_and_population_std(&values);
        BatchReport {
            feature_table_version: self.table().version().to_string(),
            summary: BatchSummary {
                items: rows.len(),
                scored: values.len(),
                failed: rows.len() - values.len(),
                mean,
                std_dev,
                histogram,
            },
            rows,
        }
    }
}

/// Mean and population standard deviation; both zero for an empty slice.
pub(crate) fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Reads `word,reference_ipa,hypothesis_ipa` rows. A header row is required.
pub fn read_batch_csv(reader: impl Read) -> Result<Vec<BatchInput>, ScoringError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map_err(|e| ScoringError::Csv(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pairs_have_zero_spread() {
        let s = Scorer::bundled();
        let items = vec![BatchInput::new("a", "kæt", "kæt"); 3];
        let r = s.batch_score(&items);
        assert_eq!(r.summary.mean, 0.0);
        assert_eq!(r.summary.std_dev, 0.0);
        assert_eq!(r.summary.histogram.excellent, 3);
    }

    #[test]
    fn failures_are_collected() {
        let s = Scorer::bundled();
        let items = vec![
            BatchInput::new("ok", "kæt", "kæp"),
            BatchInput::new("bad", "kæt", "k1t"),
            BatchInput::new("empty", "ˈ", "kæt"),
        ];
        let r = s.batch_score(&items);
        assert_eq!(r.summary.scored, 1);
        assert_eq!(r.summary.failed, 2);
        assert!(r.rows[1].error.is_some());
        assert!(r.rows[2].error.as_deref().unwrap().contains("empty"));
        assert_eq!(r.summary.histogram.total(), 1);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_and_population_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn reads_csv_with_header_and_comments() {
        let text = "word,reference_ipa,hypothesis_ipa\n# skip\nfish, fɪs ,fɪʃ\n";
        let items = read_batch_csv(text.as_bytes()).unwrap();
        assert_eq!(items, vec![BatchInput::new("fish", "fɪs", "fɪʃ")]);
    }
}
