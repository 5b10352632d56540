use alloc::string::String;

use crate::graph::NodeId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("structural error at node {node}: {detail}")]
    Structure { node: NodeId, detail: String },
    #[error("cycle through node {0}")]
    Cycle(NodeId),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("evaluation failed at node {node}: {detail}")]
    Evaluation { node: NodeId, detail: String },
    #[error("marginalized variables do not respect the network's conditioning order (variable {var})")]
    StarPattern { var: usize },
    #[error("sample {index} has zero probability under the model")]
    ZeroProbability { index: usize },
    #[error("sampling failed at node {node}: {detail}")]
    Sampling { node: NodeId, detail: String },
    #[error("non-finite gradient at parameter {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("{num_vars} variables exceed the enumeration bound of {max}")]
    TooManyVars { num_vars: usize, max: usize },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn structure(node: NodeId, detail: impl Into<String>) -> Self {
        Error::Structure {
            node,
            detail: detail.into(),
        }
    }
}
