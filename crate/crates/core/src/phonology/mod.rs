//! IPA parsing, normalization, feature-weighted edit distance and quality bands.
//!
//! All operations are pure. A [`FeatureTable`] is immutable once loaded and
//! can be shared across threads behind an `Arc`.

mod band;
mod distance;
mod features;
mod ipa;
mod rhotic;

pub use band::{band_of, BandError, BandThresholds, QualityBand, UnknownBand};
pub use distance::{
    feature_edit_distance, feature_edit_distance_with, pfer, substitution_cost, DistanceError, EditCosts,
    FeatureDistance,
};
pub use features::{FeatureTable, FeatureTableError, FeatureVector, Ternary, FEATURE_COUNT};
pub use ipa::{clean_transcription, strip_marks, tokenize_ipa, IpaError, Phone, PhoneSeq};
pub use rhotic::normalize_rhotics;

/// Clean, then merge vowel + r into r-colored vowels.
pub fn prepare(raw: &str) -> Result<PhoneSeq, IpaError> {
    Ok(normalize_rhotics(&clean_transcription(raw)?))
}
