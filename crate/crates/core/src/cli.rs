//! Command-line entry points. The binary only parses arguments and calls [`run`].

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::lexicon::{Lexicon, Position, TargetSpec};
use crate::phonology::FeatureTable;
use crate::platform::{api, score_word, Config, ConfigError, Service, ServiceError, Store, StoreError};
use crate::scoring::{read_batch_csv, Scorer, ScoringError};
use crate::story::{validate_story, GenerationSpec, StoryConfig, StoryError, TemplateLibrary};
use crate::time::{SystemClock, Timestamp};
use crate::analytics::TimeRange;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Story(#[from] StoryError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "soundstory", version, about = "Pronunciation scoring and story practice service")]
pub struct Cli {
    /// TOML config file; SOUNDSTORY_* environment variables override it.
    #[arg(long, global = true, env = "SOUNDSTORY_CONFIG")]
    pub config: Option<PathBuf>,
    /// Data directory (overrides the config file).
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one production of a lexicon word.
    Score {
        word: String,
        hypothesis_ipa: String,
        #[arg(long)]
        json: bool,
    },
    /// Score a CSV of word,reference_ipa,hypothesis_ipa rows and print the report.
    Batch { csv: PathBuf },
    /// Recommend practice words containing a phoneme.
    Recommend {
        phoneme: String,
        /// initial, final or any
        position: Position,
        count: usize,
    },
    /// Generate a story from a JSON generation spec.
    GenStory {
        spec: PathBuf,
        /// Also validate and save it into the data directory.
        #[arg(long)]
        save: bool,
    },
    /// Check a story file; exits 1 when it has violations.
    Validate {
        story: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        listen: Option<String>,
        /// Seconds between idle-session sweeps.
        #[arg(long, default_value_t = 30)]
        sweep_secs: u64,
    },
    /// Print a child's progress report.
    Export {
        child: String,
        #[arg(long)]
        from: Option<Timestamp>,
        #[arg(long)]
        to: Option<Timestamp>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = Config::load(cli.config.as_deref())?;
    if let Some(d) = &cli.data_dir {
        config.data_dir = d.clone();
    }
    Ok(config)
}

/// Feature table and lexicon from the data directory when it exists, else the bundled ones.
/// Read-only: never creates the data directory.
fn resources(config: &Config) -> Result<(FeatureTable, Lexicon), CliError> {
    if config.data_dir.is_dir() {
        let store = Store::open(&config.data_dir)?;
        Ok((store.feature_table()?, store.lexicon()?))
    } else {
        Ok((FeatureTable::bundled(), Lexicon::bundled()))
    }
}

/// Runs a parsed command, writing results to `out`. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Score {
            word,
            hypothesis_ipa,
            json,
        } => {
            let (table, lexicon) = resources(&config)?;
            let scorer = Scorer::new(Arc::new(table)).with_thresholds(config.thresholds);
            let s = score_word(&scorer, &lexicon, &word, &hypothesis_ipa)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&s).expect("serializable"))?;
            } else {
                writeln!(out, "word        {}", s.word)?;
                writeln!(out, "reference   {}", s.reference)?;
                writeln!(out, "hypothesis  {}", s.hypothesis)?;
                writeln!(out, "distance    {:.3}", s.distance)?;
                writeln!(out, "pfer        {:.3}", s.pfer)?;
                writeln!(out, "band        {}", s.band)?;
            }
        }
        Command::Batch { csv } => {
            let (table, _) = resources(&config)?;
            let scorer = Scorer::new(Arc::new(table)).with_thresholds(config.thresholds);
            let file = std::fs::File::open(&csv).map_err(|source| CliError::Io {
                path: csv.display().to_string(),
                source,
            })?;
            let report = scorer.batch_score(&read_batch_csv(file)?);
            writeln!(out, "{}", report.to_json())?;
        }
        Command::Recommend {
            phoneme,
            position,
            count,
        } => {
            let (table, lexicon) = resources(&config)?;
            let spec = TargetSpec::new(&phoneme, position, count, &table).map_err(ServiceError::from)?;
            for w in lexicon.recommend_words(&spec).map_err(ServiceError::from)? {
                writeln!(out, "{w}")?;
            }
        }
        Command::GenStory { spec, save } => {
            let spec: GenerationSpec = serde_json::from_str(&read_file(&spec)?)
                .map_err(|e| ServiceError::BadRequest(format!("{}: {e}", spec.display())))?;
            let story = if save {
                Service::open(&config, Arc::new(SystemClock))?.generate_story(&spec)?
            } else {
                let (_, lexicon) = resources(&config)?;
                crate::story::generate_story_from_template(&spec, &TemplateLibrary::bundled(), &lexicon)
                    .map_err(ServiceError::from)?
            };
            writeln!(out, "{}", story.to_json())?;
        }
        Command::Validate { story, json } => {
            let story = StoryConfig::load(&story)?;
            let (_, lexicon) = resources(&config)?;
            let violations = validate_story(&story, &lexicon);
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&violations).expect("serializable"))?;
            } else if violations.is_empty() {
                writeln!(out, "{}: ok", story.story_id)?;
            } else {
                for v in &violations {
                    writeln!(out, "{}: {v}", story.story_id)?;
                }
            }
            return Ok(if violations.is_empty() { 0 } else { 1 });
        }
        Command::Serve { listen, sweep_secs } => {
            let listen = listen.unwrap_or_else(|| config.listen.clone());
            let service = Service::open(&config, Arc::new(SystemClock))?;
            if let Some(days) = config.audio_retention_days {
                let n = service.store().purge_audio(days)?;
                tracing::info!(purged = n, days, "applied audio retention");
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(api::serve(
                Arc::new(service),
                &listen,
                Duration::from_secs(sweep_secs.max(1)),
            ))?;
        }
        Command::Export { child, from, to, out: path } => {
            let service = Service::open(&config, Arc::new(SystemClock))?;
            let report = service.export(&child, TimeRange { from, to })?.to_json();
            match path {
                Some(p) => std::fs::write(&p, report).map_err(|source| CliError::Io {
                    path: p.display().to_string(),
                    source,
                })?,
                None => out.write_all(report.as_bytes())?,
            }
        }
    }
    Ok(0)
}
