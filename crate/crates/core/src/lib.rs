//! Deterministic adversarial simulation lab for the EESMR synchronous BFT
//! state-machine-replication protocol.

pub mod adversary;
pub mod chain;
pub mod checkers;
pub mod cli;
pub mod codec;
pub mod crypto;
pub mod energy;
pub mod error;
pub mod hypergraph;
pub mod net;
pub mod protocol;
pub mod report;
pub mod scenario;
pub mod sweep;
pub mod types;

pub use chain::ChainStore;
pub use crypto::{Keyring, SigScheme, Signer};
pub use types::{Block, Digest, MsgKind, NodeId, Payload, ProtocolMsg, QuorumCert};
