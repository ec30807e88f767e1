//! Sessions survive restarts: every event is appended and synced before the
//! reply, so a new service over the same directory rebuilds the session
//! from its log and carries on.

use std::sync::Arc;

use soundstory::adapters::AudioRef;
use soundstory::platform::{AttemptAudio, Config, Service};
use soundstory::story::{GenerationSpec, Mode};
use soundstory::time::SystemClock;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = tempfile::tempdir()?;
    let config = Config {
        data_dir: data.path().into(),
        ..Config::default()
    };
    let audio = data.path().join("audio");
    std::fs::create_dir_all(&audio)?;
    std::fs::write(audio.join("take.txt"), "lake")?;
    std::fs::write(audio.join("take.ipa"), "leɪk")?;
    let take = || AttemptAudio::Ref(AudioRef::new("take").unwrap());

    let sid = {
        let service = Service::open(&config, Arc::new(SystemClock))?;
        let story = service.generate_story(&GenerationSpec {
            target_phonemes: vec!["l".into()],
            words: ["lake", "lamp", "leaf", "lion"].map(String::from).to_vec(),
            template_id: "picnic".into(),
            seed: 1,
        })?;
        let s = service.create_session("kid-3", &story.story_id, Mode::Word)?;
        service.submit_attempt(&s.session_id, take())?;
        service.submit_attempt(&s.session_id, take())?;
        println!("before restart: cursor {:?}", service.session(&s.session_id)?.cursor);
        s.session_id
        // the service is dropped here, as if the process died
    };

    let service = Service::open(&config, Arc::new(SystemClock))?;
    let state = service.session(&sid)?;
    println!("after restart:  cursor {:?}, {} attempts", state.cursor, state.attempts.len());
    service.submit_attempt(&sid, take())?;
    let log = service.session_log(&sid)?;
    println!("{} events in {}", log.lines().count(), service.store().log_path(&sid)?.display());
    for line in log.lines().take(3) {
        println!("  {line}");
    }
    Ok(())
}
