//! Batch scoring from a CSV of `word,reference_ipa,hypothesis_ipa` rows.
//!
//! ```text
//! cargo run --example batch_csv -- path/to/pairs.csv
//! ```
//!
//! Without an argument it scores the bundled evaluation pairs.

use std::fs::File;

use soundstory::scoring::{read_batch_csv, Scorer};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/asr_pairs.csv").into());
    let items = read_batch_csv(File::open(&path)?)?;
    let report = Scorer::bundled().batch_score(&items);

    for row in &report.rows {
        match (&row.distance, &row.error) {
            (Some(d), _) => println!("{:<16} {d:.3}  {}", row.word, row.band.map(|b| b.to_string()).unwrap_or_default()),
            (None, Some(e)) => println!("{:<16} error: {e}", row.word),
            (None, None) => {}
        }
    }
    let s = &report.summary;
    println!("\nscored {} failed {}  mean {:.3}  std {:.3}", s.scored, s.failed, s.mean, s.std_dev);
    Ok(())
}
