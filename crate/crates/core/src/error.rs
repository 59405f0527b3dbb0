use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("species {0} appears more than once")]
    DuplicateSpecies(usize),
    #[error("{kind} {id} has conflicting parents {first} and {second}")]
    InconsistentParent {
        kind: &'static str,
        id: usize,
        first: usize,
        second: usize,
    },
    #[error("species ids must be dense 0..{count}, but {missing} is missing")]
    NonDenseSpecies { count: usize, missing: usize },
    #[error("unknown species {0}")]
    UnknownSpecies(usize),
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("document for species {0} has no tokens")]
    EmptyDocument(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("label {label} is not a known class{}", location(.path, .line))]
    UnknownLabel {
        label: usize,
        path: Option<PathBuf>,
        line: Option<usize>,
    },
    #[error("parse error in {}:{line}: {msg}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("taxonomy node {0} has no seen samples")]
    EmptyNode(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("weight constraint violated: TR weights must be in [0,1] and sum to 1 (got {species}, {genus}, {family}; sum {sum})")]
    WeightConstraintViolated {
        species: f64,
        genus: f64,
        family: f64,
        sum: f64,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at iteration {iteration}: {what}")]
    Diverged { iteration: usize, what: String },

    #[error("synthesized bank is empty")]
    EmptyBank,
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("class {0} has no predictions")]
    MissingClass(usize),
    #[error("class {0} is not covered")]
    UnknownClass(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(path: &Option<PathBuf>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" ({}:{l})", p.display()),
        (Some(p), None) => format!(" ({})", p.display()),
        _ => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
