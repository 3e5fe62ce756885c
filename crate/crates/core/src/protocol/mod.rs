//! The per-node EESMR state machine.

pub mod helpers;
mod node;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::types::{Block, Digest, NodeId, ProtocolMsg, Round, Time, View};

pub use helpers::{
    create_proposal, form_qc, lock_compare, make_msg, matching_msg, matching_qc, verify_msg,
    verify_qc,
};
pub use node::Node;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LeaderRule {
    #[default]
    RoundRobin,
    SeededRandom {
        seed: u64,
    },
}

#[derive(Clone, Debug)]
pub struct ProtocolConfig {
    pub n: usize,
    pub f: usize,
    /// Δ in engine ticks.
    pub delta: Time,
    /// Gap between a leader's consecutive steady-state proposals.
    pub round_period: Time,
    pub leader_rule: LeaderRule,
    /// Commands taken from the txpool per proposal.
    pub batch_size: usize,
    /// Drop all equivocation handling (crash-fault variant).
    pub crash_variant: bool,
    /// A valid equivocation proof quits the view without waiting for a blame certificate.
    pub opt_equivocation_fast_quit: bool,
    /// New-view status carries the locked block without a commit certificate.
    pub opt_lock_only_status: bool,
}

impl ProtocolConfig {
    pub fn new(n: usize, f: usize, delta: Time) -> ProtocolConfig {
        ProtocolConfig {
            n,
            f,
            delta,
            round_period: delta,
            leader_rule: LeaderRule::RoundRobin,
            batch_size: 1,
            crash_variant: false,
            opt_equivocation_fast_quit: false,
            opt_lock_only_status: false,
        }
    }

    pub fn quorum(&self) -> usize {
        self.f + 1
    }

    pub fn leader(&self, v: View) -> NodeId {
        let n = self.n as u64;
        match self.leader_rule {
            LeaderRule::RoundRobin => NodeId((v % n) as u32),
            LeaderRule::SeededRandom { seed } => {
                let mut h = Sha256::new();
                h.update(seed.to_be_bytes());
                h.update(v.to_be_bytes());
                let out = h.finalize();
                let x = u64::from_be_bytes(out[..8].try_into().unwrap());
                NodeId((x % n) as u32)
            }
        }
    }
}

/// Largest tolerated fault count for `n` nodes.
pub fn max_faults(n: usize) -> usize {
    n.saturating_sub(1) / 2
}

/// Byzantine behaviour switches. All off for a correct node.
#[derive(Clone, Debug, Default)]
pub struct FaultHooks {
    /// Never propose in steady state.
    pub mute_leader: bool,
    /// Split the proposal of this round between two recipient halves.
    pub equivocate_at: Option<Round>,
    /// Propose this many blocks back to back, then fall silent.
    pub burst: Option<usize>,
    /// Advertise genesis in the commit update and, as a new leader, extend
    /// the lowest status entry.
    pub stale_commit: bool,
    /// Send no certify or vote messages.
    pub withhold_votes: bool,
    /// Stop processing once `(view, round)` is reached.
    pub crash_at: Option<(View, Round)>,
    /// Send everything twice and re-broadcast whatever arrives.
    pub duplicate: bool,
    /// Blame on entering this steady-state round.
    pub blame_at: Option<(View, Round)>,
    /// Forge a genesis-only status from these colluding keys when leading a new view.
    pub coalition: Vec<NodeId>,
}

impl FaultHooks {
    pub fn is_correct(&self) -> bool {
        !self.mute_leader
            && self.equivocate_at.is_none()
            && self.burst.is_none()
            && !self.stale_commit
            && !self.withhold_votes
            && self.crash_at.is_none()
            && !self.duplicate
            && self.blame_at.is_none()
            && self.coalition.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Dest {
    All,
    To(NodeId),
    Group(Vec<NodeId>),
}

#[derive(Clone, Debug)]
pub struct Outbound {
    pub dest: Dest,
    pub msg: Arc<ProtocolMsg>,
}

#[derive(Clone, Debug)]
pub struct CommitRecord {
    pub block: Block,
    /// Set on the block whose commit timer fired: the time it was armed.
    pub timer_armed_at: Option<Time>,
}

/// Observations the engine and monitors consume.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Note {
    /// A steady-state proposal originated by this node.
    Proposed { view: View, round: Round, block: Digest },
    /// First blame certificate seen in `view`.
    BlameQc { view: View },
    EnteredView { view: View },
    Equivocation { view: View },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub kind: &'static str,
    pub view: View,
    pub round: Round,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TimerId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerKind {
    Commit(Digest),
    Blame,
    QuitViewWait,
    StatusWait5D,
    PostQcWait1D,
    NewLeaderWait4D,
    ProposeTick(Round),
}

#[derive(Default, Debug)]
pub struct Output {
    pub sends: Vec<Outbound>,
    pub timers: Vec<(TimerId, Time)>,
    pub commits: Vec<CommitRecord>,
    pub notes: Vec<Note>,
    pub trace: Vec<TraceEvent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuitStage {
    /// Blame certificate seen; waiting Δ before quitting.
    AwaitQuit,
    /// Commit update sent; collecting certify messages for 5Δ.
    Collecting,
    /// Commit certificate broadcast; waiting Δ for the new view.
    Announced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    SteadyState,
    QuittingView(QuitStage),
    NewViewWait,
}

#[derive(Clone, Debug)]
pub enum Input<'a> {
    Start,
    Deliver(&'a ProtocolMsg),
    Timer(TimerId),
    Submit(Vec<Vec<u8>>),
}
