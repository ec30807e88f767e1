//! Word practice cards: pronunciation, variants, articulation cues for the
//! sounds in the word, and a synthesized model recording.
//!
//! ```text
//! cargo run --example practice_card -- lamp
//! ```

use std::sync::Arc;

use soundstory::platform::{Config, Service};
use soundstory::time::SystemClock;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let word = std::env::args().nth(1).unwrap_or_else(|| "rabbit".into());
    let data = tempfile::tempdir()?;
    let config = Config {
        data_dir: data.path().into(),
        ..Config::default()
    };
    let service = Service::open(&config, Arc::new(SystemClock))?;

    let card = service.practice_card(&word)?;
    println!("{}  /{}/", card.word, card.ipa.concat());
    for v in &card.variants {
        println!("  also /{v}/");
    }
    for cue in &card.mouth_cues {
        println!("  {}: {} [{}]", cue.phoneme, cue.cue, cue.asset_ref);
    }
    println!("  model audio {}", card.model_audio);
    Ok(())
}
