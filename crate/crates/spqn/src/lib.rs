//! On-disk formats and run metadata for the `spqn` command-line tool.
//!
//! * [`model_file`]: JSON model documents (structure, logits, CMO annotations).
//! * [`dataset_file`]: line-oriented `{0,1,*}` sample files.
//! * [`conv_spec`]: JSON convolutional architecture specs.
//! * [`manifest`]: per-run reproducibility records.
//! * [`number`]: float formatting shared by every text output.

pub mod conv_spec;
pub mod dataset_file;
pub mod manifest;
pub mod model_file;
pub mod number;

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid model file: {0}")]
    Model(String),
    #[error("line {line}: {detail}")]
    Dataset { line: usize, detail: String },
    #[error("invalid convolution spec: {0}")]
    ConvSpec(String),
    #[error(transparent)]
    Core(#[from] spqn_core::Error),
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| FormatError::Io {
        path: path.to_owned(),
        source,
    })
}
