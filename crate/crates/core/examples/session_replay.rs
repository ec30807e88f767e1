//! Drive a practice session with the sidecar transcriber, then rebuild the
//! session purely from its event log.
//!
//! Every other prompt goes unanswered on the first try, which earns a
//! retry; the other tries swap r for w, which is close enough to pass.

use std::sync::Arc;

use soundstory::adapters::{AudioRef, StubTranscriber};
use soundstory::lexicon::Lexicon;
use soundstory::scoring::Scorer;
use soundstory::session::{SessionEngine, SessionEvent, SessionState};
use soundstory::story::{generate_story_from_template, GenerationSpec, Mode, TemplateLibrary};
use soundstory::time::StepClock;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lexicon = Arc::new(Lexicon::bundled());
    let spec = GenerationSpec {
        target_phonemes: vec!["r".into()],
        words: ["rabbit", "rain", "red", "rock"].map(String::from).to_vec(),
        template_id: "journey".into(),
        seed: 3,
    };
    let story = generate_story_from_template(&spec, &TemplateLibrary::bundled(), &lexicon)?;

    // sidecars stand in for recorded audio
    let audio = tempfile::tempdir()?;
    let stt = StubTranscriber::new(audio.path());
    let engine = SessionEngine::new(Scorer::bundled(), Arc::clone(&lexicon), Arc::new(StepClock::fixture()));

    let start = engine.start_session("sess-demo", "kid-demo", &story, Mode::Word)?;
    let mut log: Vec<String> = start.events.iter().map(SessionEvent::to_line).collect();
    let mut state = start.state;
    let mut n = 0;
    while state.is_active() {
        let t = if state.awaiting_choice {
            let choice = story.scene(&state.cursor.scene_id).and_then(|s| s.choice.as_ref()).unwrap();
            println!("choosing {}", choice.options[0].label);
            engine.apply_choice(&state, &story, &choice.options[0].option_id)?
        } else {
            let turn = story.turn(&state.cursor.scene_id, &state.cursor.turn_id).unwrap();
            let word = turn.candidate_words()[0].clone();
            let ipa = lexicon.to_ipa(&word)?.to_string();
            n += 1;
            let said = match (n % 3, state.retry_count) {
                (0, 0) => String::new(),
                (_, 0) => ipa.replacen('r', "w", 1),
                _ => ipa,
            };
            let clip = format!("clip-{n}");
            std::fs::write(audio.path().join(format!("{clip}.txt")), &word)?;
            std::fs::write(audio.path().join(format!("{clip}.ipa")), &said)?;
            let (t, result) = engine.submit_audio(&state, &story, AudioRef::new(clip)?, &stt)?;
            println!(
                "{word:<8} {:<9} {:.3} {:<14} -> {:?} {:?}",
                format!("/{said}/"),
                result.score.distance,
                result.score.band.to_string(),
                result.outcome,
                result.feedback
            );
            t
        };
        log.extend(t.events.iter().map(SessionEvent::to_line));
        state = t.state;
    }

    let events = log.iter().map(|l| SessionEvent::from_line(l)).collect::<Result<Vec<_>, _>>()?;
    let rebuilt = SessionState::replay(&events)?;
    println!("\n{} events, status {:?}, replay matches: {}", log.len(), rebuilt.status, rebuilt == state);
    Ok(())
}
