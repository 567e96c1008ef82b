//! Readers and writers for trajectories, land-usage datasets and taxonomies.

mod land_usage;
mod taxonomy;
mod trajectory;

use std::path::Path;

use thiserror::Error;

use crate::model::ModelError;

pub use land_usage::{parse_land_usage, parse_land_usage_str, serialize_land_usage, ElementStore};
pub use taxonomy::{parse_taxonomy, parse_taxonomy_str, serialize_taxonomy, Taxonomy};
pub use trajectory::{
    format_timestamp, parse_timestamp, parse_trajectory, parse_trajectory_str,
    serialize_trajectory_csv, serialize_trajectory_jsonl, TrajectoryFormat,
    DEFAULT_ACCURACY_M,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("input contains no records")]
    EmptyFile,
    #[error("line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("duplicate element id {0}")]
    DuplicateId(String),
    #[error("element {id}: {reason}")]
    MalformedGeometry { id: String, reason: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("taxonomy contains a cycle through '{0}'")]
    CycleDetected(String),
    #[error("taxonomy has more than one root: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("line {line}: '{word}' already has parent '{existing}'")]
    ConflictingParent { line: u64, word: String, existing: String },
}

impl IngestError {
    fn from_json(e: serde_json::Error) -> Self {
        IngestError::Json { line: e.line(), column: e.column(), message: e.to_string() }
    }

    fn geometry(id: &str, e: ModelError) -> Self {
        IngestError::MalformedGeometry { id: id.to_string(), reason: e.to_string() }
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}
