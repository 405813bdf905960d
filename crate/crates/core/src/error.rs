//! Crate-wide error type.

use std::path::PathBuf;

/// Everything that can go wrong across the crate, from malformed input
/// tables to numerical breakdown inside a simulation step.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A scalar parameter is outside its legal range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Two linear-algebra operands disagree on dimension.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A computation produced NaN or infinity.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// An item id was referenced that the catalog does not contain.
    #[error("unknown item id {item}")]
    UnknownItem { item: u64 },

    /// An item in the interaction table has no supplier assignment.
    #[error("item {item} has no supplier in the metadata table")]
    MissingSupplier { item: u64 },

    /// File-level I/O failure, tagged with the offending path.
    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line of an input table failed to parse.
    #[error("parse error in {path} line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    /// An input table held no usable rows at the named stage.
    #[error("interaction table has no usable rows ({context})")]
    EmptyTable { context: String },

    /// Fewer entities available than the operation requires.
    #[error("not enough {what}: need {need}, have {have}")]
    NotEnough {
        what: &'static str,
        need: usize,
        have: usize,
    },

    /// Click feedback does not match the recommendation it refers to.
    #[error("click outcome inconsistent with its list: {reason}")]
    OutcomeMismatch { reason: String },

    /// A concentration metric was asked for on an all-zero count vector.
    #[error("cannot compute {metric} on all-zero counts")]
    AllZeroFrequencies { metric: &'static str },

    /// A statistical test needs more observations than were supplied.
    #[error("significance test needs at least {need} samples per group, got {got}")]
    TooFewSamples { need: usize, got: usize },

    /// The experiment configuration is internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// JSON (de)serialization failure.
    #[error("json error")]
    Json(#[from] serde_json::Error),

    /// A failure inside one cell of the experiment grid, tagged with
    /// enough context to reproduce it.
    #[error(
        "simulation failed: algorithm={algorithm} unbiased={unbiased} c={c} seed={seed} user={user} step={step}"
    )]
    Simulation {
        algorithm: String,
        unbiased: bool,
        c: f64,
        seed: u64,
        user: u64,
        step: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the experiment-grid coordinates it occurred at.
    pub fn in_simulation(
        self,
        algorithm: &str,
        unbiased: bool,
        c: f64,
        seed: u64,
        user: u64,
        step: u64,
    ) -> Self {
        Error::Simulation {
            algorithm: algorithm.to_string(),
            unbiased,
            c,
            seed,
            user,
            step,
            source: Box::new(self),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_includes_grid_coordinates() {
        let inner = Error::NonFinite { context: "ucb width" };
        let wrapped = inner.in_simulation("cascade-linucb", true, 2.0, 7, 42, 913);
        let msg = wrapped.to_string();
        assert!(msg.contains("cascade-linucb"));
        assert!(msg.contains("unbiased=true"));
        assert!(msg.contains("seed=7"));
        assert!(msg.contains("step=913"));
    }

    #[test]
    fn parse_error_reports_line() {
        let err = Error::Parse {
            path: PathBuf::from("ratings.csv"),
            line: 17,
            reason: "bad rating".into(),
        };
        assert_eq!(
            err.to_string(),
            "parse error in ratings.csv line 17: bad rating"
        );
    }

    #[test]
    fn empty_table_names_the_stage() {
        let err = Error::EmptyTable { context: "binarization".into() };
        assert_eq!(
            err.to_string(),
            "interaction table has no usable rows (binarization)"
        );
    }
}
