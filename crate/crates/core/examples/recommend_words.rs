//! Dictionary lookups: spelling to IPA, and practice-word recommendation
//! for a target sound in a given word position.
//!
//! ```text
//! cargo run --example recommend_words -- l final 5
//! ```

use soundstory::lexicon::{Lexicon, Position, TargetSpec};
use soundstory::phonology::FeatureTable;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let phoneme = args.next().unwrap_or_else(|| "r".into());
    let position: Position = args.next().as_deref().unwrap_or("initial").parse()?;
    let count = args.next().map_or(Ok(5), |n| n.parse())?;

    let lexicon = Lexicon::bundled();
    for word in ["rabbit", "rain", "butter", "lamp"] {
        println!("{word:<8} /{}/", lexicon.to_ipa(word)?);
    }

    let spec = TargetSpec::new(&phoneme, position, count, &FeatureTable::bundled())?;
    println!("\n{count} words with {phoneme} ({position:?}):");
    for w in lexicon.recommend_words(&spec)? {
        println!("  {w}");
    }
    Ok(())
}
