pub mod alignment;
pub mod audio;
pub mod features;
pub mod stats;
pub mod ranker;
pub mod hed;
pub mod editor;
pub mod eval;
pub mod corpus;
pub mod synth;
pub mod error;
pub mod service;
pub mod cli;

pub use error::{Error, Result};
