//! Score one child production of a dictionary word.
//!
//! ```text
//! cargo run --example score_word -- rabbit wæbɪt
//! ```

use soundstory::lexicon::Lexicon;
use soundstory::platform::score_word;
use soundstory::scoring::Scorer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let word = args.next().unwrap_or_else(|| "rabbit".into());
    let heard = args.next().unwrap_or_else(|| "wæbɪt".into());

    let summary = score_word(&Scorer::bundled(), &Lexicon::bundled(), &word, &heard)?;
    println!("{} /{}/ heard as /{}/", summary.word, summary.reference, summary.hypothesis);
    println!(
        "distance {:.3} ({}/24 feature units), pfer {:.3}, band {}",
        summary.distance, summary.distance_units, summary.pfer, summary.band
    );
    Ok(())
}
