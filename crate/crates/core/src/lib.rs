pub mod cli;
pub mod error;
pub mod ingest;
pub mod noisefloor;
pub mod pipeline;
pub mod reliability;
pub mod report;
pub mod stats;
pub mod structure;
pub mod synth;

pub use error::{Error, Result};
