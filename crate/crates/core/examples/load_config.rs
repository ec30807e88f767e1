//! Configuration: a TOML file with `SOUNDSTORY_*` environment overrides.
//!
//! ```text
//! SOUNDSTORY_RETRY_CAP=1 cargo run --example load_config
//! ```

use soundstory::platform::Config;

const FILE: &str = r#"
data_dir = "/var/lib/soundstory"
listen = "0.0.0.0:8080"
adapters = "stub"
retry_cap = 2

[thresholds]
excellent_max = 0.1
good_max = 1.0
fair_max = 2.0
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let from_file = Config::from_toml(FILE)?;
    let config = from_file.with_env(|k| std::env::var(k).ok())?;
    config.validate()?;
    println!("{config:#?}");
    println!("engine: {:?}", config.engine_config());
    Ok(())
}
