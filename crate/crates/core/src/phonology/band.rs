use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pronunciation quality label. Ordered best to worst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityBand {
    Excellent,
    Good,
    Fair,
    NeedsPractice,
}

impl QualityBand {
    pub const ALL: [QualityBand; 4] = [
        QualityBand::Excellent,
        QualityBand::Good,
        QualityBand::Fair,
        QualityBand::NeedsPractice,
    ];

    /// Stable machine id.
    pub fn id(self) -> &'static str {
        match self {
            QualityBand::Excellent => "excellent",
            QualityBand::Good => "good",
            QualityBand::Fair => "fair",
            QualityBand::NeedsPractice => "needs_practice",
        }
    }

    /// Dashboard label.
    pub fn label(self) -> &'static str {
        match self {
            QualityBand::Excellent => "Excellent",
            QualityBand::Good => "Good",
            QualityBand::Fair => "Fair",
            QualityBand::NeedsPractice => "Need Practice",
        }
    }
}

impl fmt::Display for QualityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown quality band {0:?}")]
pub struct UnknownBand(pub String);

impl FromStr for QualityBand {
    type Err = UnknownBand;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        match norm.as_str() {
            "excellent" | "e" => Ok(QualityBand::Excellent),
            "good" | "g" => Ok(QualityBand::Good),
            "fair" | "f" => Ok(QualityBand::Fair),
            "needs_practice" | "need_practice" | "poor" | "np" => Ok(QualityBand::NeedsPractice),
            _ => Err(UnknownBand(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandError {
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("band thresholds must be positive and strictly increasing")]
    InvalidThresholds,
}

/// Upper bounds (inclusive) of the first three bands on raw feature edit distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    pub excellent_max: f64,
    pub good_max: f64,
    pub fair_max: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            excellent_max: 0.1,
            good_max: 1.0,
            fair_max: 2.0,
        }
    }
}

impl BandThresholds {
    pub fn new(excellent_max: f64, good_max: f64, fair_max: f64) -> Result<Self, BandError> {
        let t = BandThresholds {
            excellent_max,
            good_max,
            fair_max,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), BandError> {
        let ok = self.excellent_max > 0.0
            && self.excellent_max < self.good_max
            && self.good_max < self.fair_max
            && self.fair_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(BandError::InvalidThresholds)
        }
    }
}

/// Maps a raw feature edit distance onto a band. Intervals are `(lo, hi]`.
pub fn band_of(distance: f64, thresholds: &BandThresholds) -> Result<QualityBand, BandError> {
    if distance.is_nan() || distance < 0.0 {
        return Err(BandError::NegativeDistance(distance));
    }
    Ok(if distance <= thresholds.excellent_max {
        QualityBand::Excellent
    } else if distance <= thresholds.good_max {
        QualityBand::Good
    } else if distance <= thresholds.fair_max {
        QualityBand::Fair
    } else {
        QualityBand::NeedsPractice
    })
}
