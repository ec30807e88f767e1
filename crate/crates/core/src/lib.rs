pub mod adapters;
pub mod analytics;
pub mod cli;
pub mod cues;
pub mod lexicon;
pub mod phonology;
pub mod platform;
pub mod scoring;
pub mod session;
pub mod story;
pub mod time;
