//! The metric underneath every score: tokenize two IPA strings, merge
//! rhotic vowels, and take the feature-weighted edit distance.
//!
//! A substitution costs the fraction of the 24 features that differ, so
//! `r` for `w` is cheaper than `r` for `k`.

use soundstory::phonology::{
    band_of, feature_edit_distance, normalize_rhotics, tokenize_ipa, BandThresholds, FeatureTable,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let table = FeatureTable::bundled();
    let thresholds = BandThresholds::default();
    println!("feature table {} ({} symbols)", table.version(), table.len());

    let pairs = [("ɹæbɪt", "wæbɪt"), ("ɹæbɪt", "kæbɪt"), ("bʌtəɹ", "bʌtɚ"), ("fɪʃ", "fɪs"), ("ˈɹeɪ.t͡s", "ɹeɪts")];
    for (reference, heard) in pairs {
        let r = normalize_rhotics(&tokenize_ipa(reference)?.cleaned());
        let h = normalize_rhotics(&tokenize_ipa(heard)?.cleaned());
        let d = feature_edit_distance(&r, &h, &table)?;
        println!(
            "{reference:>10} vs {heard:<8} [{}] vs [{}]  {:.3}  {}",
            r.symbols().join(" "),
            h.symbols().join(" "),
            d.value(),
            band_of(d.value(), &thresholds)?
        );
    }
    Ok(())
}
