//! Relative-attribute ranking functions.
//!
//! One linear scorer per (emotion, level) is trained from ordered pairs
//! (emotional sample above neutral sample) and similar pairs (same class),
//! then min-max calibrated on its training scores so that runtime output
//! is an intensity in [0, 1].

mod model;
mod pairs;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{load_model, save_model, RankingModel, MODEL_FORMAT_VERSION, SUPPORTED_MODEL_VERSIONS};
pub use pairs::{build_pairs, LabeledSample, PairCaps, PairSet};
pub use train::{train, Hyper, Objective, Standardizer, TrainOutcome, TrainReport};

/// Score spread below which a model is considered collapsed.
pub const DEGENERATE_SPREAD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankerError {
    #[error("insufficient data: no samples for class {0:?}")]
    InsufficientData(String),
    #[error("invalid pair set: {0}")]
    InvalidPairs(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("unsupported model version {found}; supported versions: {supported:?}")]
    Version { found: u64, supported: Vec<u64> },
    #[error("feature dimension mismatch: model has {expected}, input has {found}")]
    Dimension { expected: usize, found: usize },
}

impl RankerError {
    pub fn code(&self) -> &'static str {
        match self {
            RankerError::InsufficientData(_) => "ranker.insufficient_data",
            RankerError::InvalidPairs(_) => "ranker.invalid_pairs",
            RankerError::InvalidHyper(_) => "ranker.invalid_hyper",
            RankerError::Corrupt(_) => "ranker.corrupt_file",
            RankerError::Version { .. } => "ranker.version",
            RankerError::Dimension { .. } => "ranker.dimension",
        }
    }
}

/// Segmental level a ranker is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Utterance,
    Word,
    Phoneme,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Utterance, Level::Word, Level::Phoneme];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Utterance => "utterance",
            Level::Word => "word",
            Level::Phoneme => "phoneme",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "utterance" | "u" => Ok(Level::Utterance),
            "word" | "w" => Ok(Level::Word),
            "phoneme" | "p" => Ok(Level::Phoneme),
            other => Err(format!("unknown level {other:?} (expected utterance, word or phoneme)")),
        }
    }
}

/// Maps a raw score into [0, 1] given training bounds.
pub fn calibrate(raw: f64, score_min: f64, score_max: f64) -> f64 {
    let spread = score_max - score_min;
    if spread < DEGENERATE_SPREAD {
        return 0.5;
    }
    ((raw - score_min) / spread).clamp(0.0, 1.0)
}
