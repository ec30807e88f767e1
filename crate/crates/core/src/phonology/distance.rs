//! Hamming feature edit distance.
//!
//! Costs are kept as integer counts of feature units (1/24 of a full edit)
//! so alignment ties and band boundaries are decided exactly.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{FeatureTable, FeatureVector, FEATURE_COUNT};
use super::ipa::{Phone, PhoneSeq};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistanceError {
    #[error("phone {symbol:?} is not in the feature table")]
    UnknownSymbol { symbol: String },
    #[error("reference pronunciation is empty")]
    EmptyReference,
}

/// Edit distance measured in feature units; one unit is one mismatched feature.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureDistance(u32);

impl FeatureDistance {
    pub const UNITS_PER_EDIT: u32 = FEATURE_COUNT as u32;
    pub const ZERO: FeatureDistance = FeatureDistance(0);

    pub fn from_units(units: u32) -> Self {
        FeatureDistance(units)
    }

    /// `n` whole insertions/deletions at unit cost.
    pub fn whole_edits(n: usize) -> Self {
        FeatureDistance(n as u32 * Self::UNITS_PER_EDIT)
    }

    pub fn units(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / f64::from(Self::UNITS_PER_EDIT)
    }
}

impl fmt::Display for FeatureDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.value())
    }
}

/// Insertion/deletion cost in feature units.
///
/// The default of 24 units (one full edit) is what the reference scores
/// assume; other values exist for experimentation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCosts {
    pub indel_units: u32,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts {
            indel_units: FeatureDistance::UNITS_PER_EDIT,
        }
    }
}

fn lookup<'t>(table: &'t FeatureTable, phone: &Phone) -> Result<&'t FeatureVector, DistanceError> {
    table.get(phone.as_str()).ok_or_else(|| DistanceError::UnknownSymbol {
        symbol: phone.as_str().to_owned(),
    })
}

fn resolve<'t>(table: &'t FeatureTable, seq: &PhoneSeq) -> Result<Vec<&'t FeatureVector>, DistanceError> {
    seq.iter().map(|p| lookup(table, p)).collect()
}

/// Fraction of the 24 features on which `a` and `b` disagree.
pub fn substitution_cost(a: &Phone, b: &Phone, table: &FeatureTable) -> Result<f64, DistanceError> {
    let units = lookup(table, a)?.mismatches(lookup(table, b)?);
    Ok(FeatureDistance::from_units(units).value())
}

/// Minimal-cost alignment of `reference` against `hypothesis` with unit indels.
pub fn feature_edit_distance(
    reference: &PhoneSeq,
    hypothesis: &PhoneSeq,
    table: &FeatureTable,
) -> Result<FeatureDistance, DistanceError> {
    feature_edit_distance_with(reference, hypothesis, table, EditCosts::default())
}

pub fn feature_edit_distance_with(
    reference: &PhoneSeq,
    hypothesis: &PhoneSeq,
    table: &FeatureTable,
    costs: EditCosts,
) -> Result<FeatureDistance, DistanceError> {
    let r = resolve(table, reference)?;
    let h = resolve(table, hypothesis)?;
    Ok(FeatureDistance(align_units(&r, &h, costs.indel_units)))
}

pub(crate) fn align_units(r: &[&FeatureVector], h: &[&FeatureVector], indel: u32) -> u32 {
    // two-row Wagner-Fischer over feature units
    let mut prev: Vec<u32> = (0..=h.len() as u32).map(|j| j * indel).collect();
    let mut cur = vec![0u32; h.len() + 1];
    for (i, rv) in r.iter().enumerate() {
        cur[0] = (i as u32 + 1) * indel;
        for (j, hv) in h.iter().enumerate() {
            let sub = prev[j] + rv.mismatches(hv);
            let del = prev[j + 1] + indel;
            let ins = cur[j] + indel;
            cur[j + 1] = sub.min(del).min(ins);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[h.len()]
}

/// Phone feature error rate: feature edit distance over reference length.
pub fn pfer(reference: &PhoneSeq, hypothesis: &PhoneSeq, table: &FeatureTable) -> Result<f64, DistanceError> {
    if reference.is_empty() {
        return Err(DistanceError::EmptyReference);
    }
    let d = feature_edit_distance(reference, hypothesis, table)?;
    Ok(d.value() / reference.len() as f64)
}
