use thiserror::Error;

use crate::types::{Digest, MsgKind, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QcError {
    #[error("insufficient matching messages: {got} < quorum {need}")]
    Insufficient { got: usize, need: usize },
    #[error("duplicate signer {0}")]
    DuplicateSigner(NodeId),
    #[error("message from {0} does not match {1:?} in view {2}")]
    Mismatch(NodeId, MsgKind, u64),
    #[error("bad signature from {0}")]
    BadSignature(NodeId),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("unknown parent {0}")]
    UnknownParent(Digest),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("topology is not {f}-connected; removing {cut:?} disconnects the correct nodes")]
    Disconnected { f: usize, cut: Vec<u32> },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
        ConfigError::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid topology parameters: {0}")]
    Params(String),
    #[error("edge from {0} contains a self-loop")]
    SelfLoop(u32),
    #[error("edges of node {node} are not independent")]
    Dependent { node: u32 },
    #[error("enumeration budget exceeded: {0} subsets")]
    Budget(u128),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("undefined: view-change costs are equal")]
    EqualViewChangeCost,
    #[error("unknown table entry {0}")]
    UnknownEntry(String),
    #[error("worst-case cost must be positive, got {0}")]
    NonPositiveCost(f64),
}
