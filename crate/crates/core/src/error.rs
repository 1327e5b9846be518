use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while loading, evaluating or reporting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { path: PathBuf, offset: usize },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: missing column {column:?}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: row {row}: invalid line id {value:?}")]
    InvalidLineId {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{path}: duplicate line id {line_id}")]
    DuplicateLineId { path: PathBuf, line_id: u64 },

    #[error("{path}: line ids are not a contiguous 1..{expected_max} range (missing {missing})")]
    NonContiguousLineIds {
        path: PathBuf,
        expected_max: usize,
        missing: u64,
    },

    #[error("{path}: line {line_id}: empty content")]
    EmptyContent { path: PathBuf, line_id: u64 },

    #[error(
        "event {event_id:?} maps to two templates: {first:?} (row {first_row}) and {second:?} (row {second_row})"
    )]
    TemplateConflict {
        event_id: String,
        first: String,
        first_row: usize,
        second: String,
        second_row: usize,
    },

    #[error("event {event_id:?} has no template")]
    UnknownEvent { event_id: String },

    #[error("line {line_id} has no parsed event id")]
    MissingParsedEvent { line_id: u64 },

    #[error("ground truth has {truth} records, parsed output has {parsed}")]
    LengthMismatch { parsed: usize, truth: usize },

    #[error("content differs from ground truth at line {line_id}")]
    ContentMismatch { line_id: u64 },

    #[error("labeled metrics need ground truth attached")]
    MissingGroundTruth,

    #[error("template set is empty")]
    EmptyTemplateSet,

    #[error("silhouette needs at least 2 templates, found {found}")]
    TooFewTemplates { found: usize },

    #[error("message at line {line_id} does not match template of event {event_id:?}")]
    Unmatched { line_id: u64, event_id: String },

    #[error("unknown correction profile {0:?}")]
    UnknownProfile(String),

    #[error("invalid correction profile: {0}")]
    InvalidProfile(String),

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSynthSpec(String),

    #[error("metric {metric} missing for dataset {dataset:?}, parser {parser:?}")]
    MissingMetric {
        metric: String,
        dataset: String,
        parser: String,
    },

    #[error("{0}")]
    InvalidReport(String),

    #[error("{0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is a computation with no defined value
    /// (single template silhouette, constant series correlation, ...).
    pub fn is_undefined(&self) -> bool {
        matches!(self, Error::TooFewTemplates { .. } | Error::Undefined(_))
    }
}
