//! Parent-facing analytics over a stored session: per-word dashboard,
//! recording cards filtered by band, and the exported report.

use std::sync::Arc;

use soundstory::analytics::{CardFilter, TimeRange};
use soundstory::phonology::QualityBand;
use soundstory::platform::{AttemptAudio, Config, Service};
use soundstory::story::{GenerationSpec, Mode};
use soundstory::time::StepClock;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = tempfile::tempdir()?;
    let config = Config {
        data_dir: data.path().into(),
        ..Config::default()
    };
    let service = Service::open(&config, Arc::new(StepClock::fixture()))?;
    let story = service.generate_story(&GenerationSpec {
        target_phonemes: vec!["l".into()],
        words: ["lake", "lamp", "leaf", "lion"].map(String::from).to_vec(),
        template_id: "picnic".into(),
        seed: 4,
    })?;

    let session = service.create_session("kid-7", &story.story_id, Mode::Word)?;
    let heard = ["jeɪk", "", "wif", "liːf", "laɪən", "", "leɪk", "lif", "jaɪən", "", "læmp"];
    let mut i = 0;
    while service.session(&session.session_id)?.is_active() {
        let turn = service.current_turn(&session.session_id)?;
        if let Some(choice) = turn.choice {
            service.apply_choice(&session.session_id, &choice.options[0].option_id)?;
            continue;
        }
        let word = &turn.target_words[0];
        // a real client uploads audio; here the transcript travels in sidecars
        let bytes = format!("recording {i}").into_bytes();
        let r = soundstory::adapters::AudioRef::for_content(&bytes);
        std::fs::write(data.path().join("audio").join(format!("{r}.txt")), word)?;
        std::fs::write(data.path().join("audio").join(format!("{r}.ipa")), heard[i % heard.len()])?;
        service.submit_attempt(&session.session_id, AttemptAudio::Blob(bytes))?;
        i += 1;
    }

    let dash = service.dashboard("kid-7", TimeRange::all())?;
    println!("{} productions", dash.total_productions);
    for w in &dash.words {
        let h = &w.band_histogram;
        println!(
            "  {:<6} n={} mean {:.3}  E{} G{} F{} NP{}",
            w.orthography, w.production_count, w.mean_distance, h.excellent, h.good, h.fair, h.needs_practice
        );
    }

    let filter = CardFilter {
        band: Some(QualityBand::NeedsPractice),
        ..CardFilter::default()
    };
    for card in service.cards("kid-7", &filter, TimeRange::all())? {
        println!("  needs practice: {} heard /{}/ ({})", card.word, card.phonemic_transcript, card.audio_ref);
    }

    let report = service.export("kid-7", TimeRange::all())?.to_json();
    println!("report: {} bytes", report.len());
    Ok(())
}
