use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped into input/validation failures (bad bundles,
/// out-of-range values, infeasible configurations) and runtime failures
/// (numerical divergence, unsatisfied shape contracts at call time).
/// [`Error::is_validation`] distinguishes the two for exit-code mapping.
#[derive(Error, Debug)]
pub enum Error {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} line {line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("class {class} has {have} candidate nodes, need {need}")]
    ClassQuota {
        class: usize,
        have: usize,
        need: usize,
    },

    #[error("non-finite loss at iteration {iter}")]
    NonFinite { iter: usize },

    #[error("stale forward trace: parameters changed since it was captured")]
    StaleTrace,

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("optimizer failed to converge within {iters} iterations")]
    NoConvergence { iters: usize },
}

impl Error {
    /// True for errors caused by invalid inputs or configuration, as
    /// opposed to runtime/numerical failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MissingFile(_)
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::Validation(_)
                | Error::Shape(_)
                | Error::ClassQuota { .. }
                | Error::EmptyGroup(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
