use serde::Serialize;
use thiserror::Error;

use crate::alignment::AlignmentError;
use crate::audio::AudioError;
use crate::corpus::CorpusError;
use crate::editor::EditError;
use crate::eval::EvalError;
use crate::features::FeatureError;
use crate::hed::HedError;
use crate::ranker::RankerError;

/// Any error the library can produce, tagged with the module it came from.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Alignment(#[from] AlignmentError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error(transparent)]
    Hed(#[from] HedError),
    #[error(transparent)]
    Editor(#[from] EditError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }

    /// Dotted machine-readable code, e.g. `audio.parse`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Audio(e) => e.code(),
            Error::Alignment(e) => e.code(),
            Error::Features(e) => e.code(),
            Error::Ranker(e) => e.code(),
            Error::Hed(e) => e.code(),
            Error::Editor(e) => e.code(),
            Error::Eval(e) => e.code(),
            Error::Corpus(e) => e.code(),
            Error::Io { .. } => "io.error",
            Error::Usage(_) => "cli.usage",
        }
    }

    /// Module that produced the error: the first segment of the code.
    pub fn module(&self) -> &'static str {
        let code = self.code();
        &code[..code.find('.').unwrap_or(code.len())]
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: ErrorBody { module: self.module().into(), code: self.code().into(), message: self.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub module: String,
    pub code: String,
    pub message: String,
}

/// JSON error payload shared by the CLI (stderr) and the HTTP service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct ErrorReport {
    pub error: ErrorBody,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_and_modules() {
        let e = Error::from(AudioError::Parse { offset: 12, message: "bad".into() });
        assert_eq!(e.code(), "audio.parse");
        assert_eq!(e.module(), "audio");
        let r = e.report();
        assert_eq!(r.error.module, "audio");
        assert!(r.error.message.contains("12"));
        let e = Error::from(HedError::Ranker(RankerError::Corrupt("x".into())));
        assert_eq!(e.module(), "ranker");
    }
}
