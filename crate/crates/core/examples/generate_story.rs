//! Build a story from a template, then run the validator over it and over
//! a deliberately broken copy.
//!
//! ```text
//! cargo run --example generate_story -- journey 7
//! ```

use soundstory::lexicon::Lexicon;
use soundstory::story::{generate_story_from_template, validate_story, GenerationSpec, TemplateLibrary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let template_id = args.next().unwrap_or_else(|| "journey".into());
    let seed = args.next().map_or(Ok(1), |s| s.parse())?;

    let lexicon = Lexicon::bundled();
    let templates = TemplateLibrary::bundled();
    println!("templates: {}", templates.ids().collect::<Vec<_>>().join(", "));

    let spec = GenerationSpec {
        target_phonemes: vec!["r".into()],
        words: ["rabbit", "rain", "red", "rock", "rope"].map(String::from).to_vec(),
        template_id,
        seed,
    };
    let story = generate_story_from_template(&spec, &templates, &lexicon)?;
    println!("{} ({:.1} min)", story.title, story.estimated_minutes);
    for scene in &story.scenes {
        println!("  [{}]", scene.scene_id);
        for turn in &scene.turns {
            println!("    {:<50} bombardment {}", turn.plain_line(), turn.bombardment_count);
        }
        if let Some(choice) = &scene.choice {
            let labels: Vec<&str> = choice.options.iter().map(|o| o.label.as_str()).collect();
            println!("    choice: {} {labels:?}", choice.prompt);
        }
    }
    println!("violations: {}", validate_story(&story, &lexicon).len());

    let mut broken = story.clone();
    broken.scenes[0].turns[0].bombardment_count += 3;
    broken.scenes[0].next = Some("nowhere".into());
    for v in validate_story(&broken, &lexicon) {
        println!("  {v}");
    }
    Ok(())
}
