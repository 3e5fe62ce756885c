//! Synchronous network simulation over a hypergraph.

mod delivery;
mod engine;
mod ledger;

pub use delivery::DeliveryPolicy;
pub use engine::{Engine, EngineConfig, NodeSummary, RunOutcome, StopReason, TraceRecord};
pub use ledger::{Bucket, Transmission, TransmissionLedger, Usage};
