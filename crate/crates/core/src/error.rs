use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("malformed FASTA header on line {line}: {reason}")]
    MalformedHeader { line: usize, reason: String },

    #[error("record {label}: invalid residue {character:?} at position {position}")]
    InvalidResidue {
        label: String,
        position: usize,
        character: char,
    },

    #[error("record {label}: empty residues")]
    EmptySequence { label: String },

    #[error("duplicate label {0}")]
    DuplicateLabel(String),

    #[error("duplicate accession {0}")]
    DuplicateAccession(String),

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("dataset needs at least 2 distinct years, found {0}")]
    TooFewYears(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no alignment column has a gap fraction below {threshold}")]
    NoMatchColumns { threshold: f64 },

    #[error("requested model length {length} exceeds alignment width {width}")]
    LengthExceedsWidth { length: usize, width: usize },

    #[error("aligned sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("no comparable sites between the two sequences")]
    NoComparableSites,

    #[error("{method} distance saturated: {detail}")]
    Saturation {
        method: &'static str,
        detail: String,
    },

    #[error(
        "least-squares fit of degree {degree} needs at least {needed} observations, got {got}"
    )]
    Underdetermined {
        degree: usize,
        needed: usize,
        got: usize,
    },

    #[error("confidence band needs positive residual degrees of freedom")]
    ZeroDegreesOfFreedom,

    #[error("Newick parse error at byte {position}: {reason}")]
    Newick { position: usize, reason: String },

    #[error("unknown label {0}")]
    UnknownLabel(String),

    #[error("reference year {0} has no representative")]
    MissingReference(i32),

    #[error("date {date} precedes the reference date {reference}")]
    DateBeforeReference {
        date: chrono::NaiveDate,
        reference: chrono::NaiveDate,
    },

    #[error("HTTP failure for {url}: {reason}")]
    Http { url: String, reason: String },

    #[error("accessions not found: {}", .0.join(", "))]
    AccessionsNotFound(Vec<String>),

    #[error("missing upstream artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Json(_) => ErrorKind::Config,
            Error::Saturation { .. }
            | Error::Underdetermined { .. }
            | Error::ZeroDegreesOfFreedom
            | Error::NoComparableSites => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
