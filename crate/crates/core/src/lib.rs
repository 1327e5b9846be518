//! Evaluation of log parser output.
//!
//! Label-free scoring (PMSS/EMSS, a medoid silhouette over token edit
//! distance) alongside the label-based GA, PA, FGA and FTA metrics, a
//! template correction engine for producing ground-truth variants, and
//! report-level analyses (version deltas, optimal parsers, metric gaps,
//! rank correlation, timing).

pub mod cli;
pub mod corpus;
pub mod corrections;
pub mod error;
pub mod labeled_metrics;
pub mod report;
pub mod silhouette;
pub mod synth;
pub mod template_prep;
pub mod token_distance;

pub use error::{Error, Result};
