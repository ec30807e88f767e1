//! Sentence mode: find the target word inside a whole utterance.
//!
//! The scorer slides windows a little shorter and longer than the target
//! across the utterance and keeps the closest one. The word only counts as
//! found when the orthographic transcript mentions it.

use soundstory::adapters::AudioRef;
use soundstory::lexicon::Lexicon;
use soundstory::phonology::tokenize_ipa;
use soundstory::scoring::{AttemptContext, ReferencePronunciation, Scorer};
use soundstory::time::Timestamp;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scorer = Scorer::bundled();
    let lexicon = Lexicon::bundled();
    let target = ReferencePronunciation::from_lexicon("rabbit", &lexicon)?;

    let utterances = [
        ("I see a rabbit", "aɪ si ə ɹæbɪt"),
        ("I see a wabbit", "aɪ si ə wæbɪt"),
        ("I see a cat", "aɪ si ə kæt"),
    ];
    for (i, (text, ipa)) in utterances.iter().enumerate() {
        let ctx = AttemptContext {
            attempt_id: format!("demo-{i}"),
            audio_ref: AudioRef::new(format!("demo-{i}"))?,
            orthographic_transcript: text.to_string(),
            timestamp: Timestamp::from_millis(0),
        };
        let score = scorer.score_sentence_attempt(&target, &tokenize_ipa(ipa)?, ctx)?;
        let window = score
            .window
            .map(|w| score.hypothesis.window(w.start, w.len).symbols().concat())
            .unwrap_or_else(|| "-".into());
        println!(
            "{text:<16} found={:<5} window={window:<8} distance={:.3} band={}",
            score.target_found, score.distance, score.band
        );
    }
    Ok(())
}
