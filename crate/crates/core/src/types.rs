//! Blocks, protocol messages and quorum certificates.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::codec::{Canonical, Encoder};

pub type View = u64;
pub type Round = u64;
/// Simulated time in engine ticks.
pub type Time = u64;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// 32-byte SHA-256 digest, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.short())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let raw = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = raw
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))?;
        Ok(Digest(arr))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Signature(pub Vec<u8>);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sig:{}", hex::encode(&self.0[..self.0.len().min(4)]))
    }
}

/// A unit of the replicated log. Immutable once built; the digest is cached.
#[derive(Clone, PartialEq, Eq)]
pub struct Block {
    height: u64,
    parent: Digest,
    contents: Vec<Vec<u8>>,
    proposer: NodeId,
    round: Round,
    view: View,
    extra: Option<Vec<u8>>,
    digest: Digest,
}

impl Block {
    pub fn new(
        height: u64,
        parent: Digest,
        contents: Vec<Vec<u8>>,
        proposer: NodeId,
        view: View,
        round: Round,
        extra: Option<Vec<u8>>,
    ) -> Block {
        let mut b = Block {
            height,
            parent,
            contents,
            proposer,
            round,
            view,
            extra,
            digest: Digest::ZERO,
        };
        b.digest = Digest::of(&b.to_canonical_bytes());
        b
    }

    /// The globally known genesis block `G` at height 0.
    pub fn genesis() -> Block {
        Block::new(0, Digest::ZERO, Vec::new(), NodeId(0), 0, 0, None)
    }

    pub fn digest(&self) -> Digest {
        self.digest
    }
    pub fn height(&self) -> u64 {
        self.height
    }
    pub fn parent(&self) -> Digest {
        self.parent
    }
    pub fn contents(&self) -> &[Vec<u8>] {
        &self.contents
    }
    pub fn proposer(&self) -> NodeId {
        self.proposer
    }
    pub fn round(&self) -> Round {
        self.round
    }
    pub fn view(&self) -> View {
        self.view
    }
    pub fn extra(&self) -> Option<&[u8]> {
        self.extra.as_deref()
    }
    pub fn is_genesis(&self) -> bool {
        self.height == 0
    }
}

impl Canonical for Block {
    fn encode(&self, enc: &mut Encoder) {
        enc.u64(self.height)
            .digest(&self.parent)
            .u32(self.proposer.0)
            .u64(self.view)
            .u64(self.round)
            .len_prefix(self.contents.len());
        for c in &self.contents {
            enc.bytes(c);
        }
        enc.option(self.extra.as_ref(), |e, x| {
            e.bytes(x);
        });
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Block(h={}, v={}, r={}, {:?} <- {:?}, {} cmds)",
            self.height,
            self.view,
            self.round,
            self.digest,
            self.parent,
            self.contents.len()
        )
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgKind {
    Propose,
    Blame,
    Certify,
    CommitUpdate,
    NewViewProposal,
    VoteMsg,
    BlameQc,
    CommitQc,
    SyncRequest,
    SyncResponse,
}

impl MsgKind {
    pub fn tag(self) -> u8 {
        match self {
            MsgKind::Propose => 1,
            MsgKind::Blame => 2,
            MsgKind::Certify => 3,
            MsgKind::CommitUpdate => 4,
            MsgKind::NewViewProposal => 5,
            MsgKind::VoteMsg => 6,
            MsgKind::BlameQc => 7,
            MsgKind::CommitQc => 8,
            MsgKind::SyncRequest => 9,
            MsgKind::SyncResponse => 10,
        }
    }
}

/// f+1 matching signatures from distinct nodes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QuorumCert {
    pub kind: MsgKind,
    pub view: View,
    /// Certified datum. `Digest::ZERO` for certificates over `(kind, view)` only.
    pub subject: Digest,
    pub signers: Vec<NodeId>,
    pub sigs: Vec<Signature>,
}

impl QuorumCert {
    pub fn size(&self) -> usize {
        self.signers.len()
    }
}

impl Canonical for QuorumCert {
    fn encode(&self, enc: &mut Encoder) {
        enc.u8(self.kind.tag())
            .u64(self.view)
            .digest(&self.subject)
            .len_prefix(self.signers.len());
        for (id, sig) in self.signers.iter().zip(&self.sigs) {
            enc.u32(id.0).bytes(&sig.0);
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Payload {
    /// Steady-state proposal (rounds >= 3) or the round-2 proposal carrying
    /// the vote certificate on the new-view proposal.
    Propose {
        block: Block,
        justify: Option<QuorumCert>,
    },
    /// `proof` carries two equivocating leader proposals.
    Blame {
        proof: Option<Box<(ProtocolMsg, ProtocolMsg)>>,
    },
    Certify {
        subject: Digest,
    },
    CommitUpdate {
        block: Block,
    },
    /// Round-1 proposal of a new view; `status` holds the signed status
    /// messages (each a `CommitQc`) the leader collected.
    NewViewProposal {
        block: Block,
        status: Vec<ProtocolMsg>,
    },
    VoteMsg {
        subject: Digest,
    },
    BlameQc {
        qc: QuorumCert,
    },
    /// A certified committed block. `qc` is `None` only for the lock-only
    /// status optimization.
    CommitQc {
        qc: Option<QuorumCert>,
        block: Block,
    },
    SyncRequest {
        want: Digest,
        frontier: Digest,
    },
    SyncResponse {
        blocks: Vec<Block>,
    },
}

impl Payload {
    pub fn kind(&self) -> MsgKind {
        match self {
            Payload::Propose { .. } => MsgKind::Propose,
            Payload::Blame { .. } => MsgKind::Blame,
            Payload::Certify { .. } => MsgKind::Certify,
            Payload::CommitUpdate { .. } => MsgKind::CommitUpdate,
            Payload::NewViewProposal { .. } => MsgKind::NewViewProposal,
            Payload::VoteMsg { .. } => MsgKind::VoteMsg,
            Payload::BlameQc { .. } => MsgKind::BlameQc,
            Payload::CommitQc { .. } => MsgKind::CommitQc,
            Payload::SyncRequest { .. } => MsgKind::SyncRequest,
            Payload::SyncResponse { .. } => MsgKind::SyncResponse,
        }
    }

    /// Number of signatures embedded in the payload (not counting the two
    /// on the enclosing message).
    pub fn embedded_signatures(&self) -> usize {
        match self {
            Payload::Propose { justify, .. } => justify.as_ref().map_or(0, |q| q.size()),
            Payload::Blame { proof } => proof
                .as_ref()
                .map_or(0, |p| p.0.signature_count() + p.1.signature_count()),
            Payload::NewViewProposal { status, .. } => {
                status.iter().map(|m| m.signature_count()).sum()
            }
            Payload::BlameQc { qc } => qc.size(),
            Payload::CommitQc { qc, .. } => qc.as_ref().map_or(0, |q| q.size()),
            _ => 0,
        }
    }
}

impl Canonical for Payload {
    fn encode(&self, enc: &mut Encoder) {
        enc.u8(self.kind().tag());
        match self {
            Payload::Propose { block, justify } => {
                block.encode(enc);
                enc.option(justify.as_ref(), |e, q| q.encode(e));
            }
            Payload::Blame { proof } => {
                enc.option(proof.as_ref(), |e, p| {
                    p.0.encode(e);
                    p.1.encode(e);
                });
            }
            Payload::Certify { subject } | Payload::VoteMsg { subject } => {
                enc.digest(subject);
            }
            Payload::CommitUpdate { block } => block.encode(enc),
            Payload::NewViewProposal { block, status } => {
                block.encode(enc);
                enc.len_prefix(status.len());
                for m in status {
                    m.encode(enc);
                }
            }
            Payload::BlameQc { qc } => qc.encode(enc),
            Payload::CommitQc { qc, block } => {
                enc.option(qc.as_ref(), |e, q| q.encode(e));
                block.encode(enc);
            }
            Payload::SyncRequest { want, frontier } => {
                enc.digest(want).digest(frontier);
            }
            Payload::SyncResponse { blocks } => {
                enc.len_prefix(blocks.len());
                for b in blocks {
                    b.encode(enc);
                }
            }
        }
    }
}

/// A signed protocol message. `view_sig` covers `(kind, view)` and
/// `data_sig` covers `(payload, view)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProtocolMsg {
    payload: Payload,
    view: View,
    round: Round,
    sender: NodeId,
    view_sig: Signature,
    data_sig: Signature,
    digest: Digest,
}

impl ProtocolMsg {
    pub(crate) fn assemble(
        payload: Payload,
        view: View,
        round: Round,
        sender: NodeId,
        view_sig: Signature,
        data_sig: Signature,
    ) -> ProtocolMsg {
        let mut m = ProtocolMsg {
            payload,
            view,
            round,
            sender,
            view_sig,
            data_sig,
            digest: Digest::ZERO,
        };
        m.digest = Digest::of(&m.to_canonical_bytes());
        m
    }

    pub fn kind(&self) -> MsgKind {
        self.payload.kind()
    }
    pub fn payload(&self) -> &Payload {
        &self.payload
    }
    pub fn view(&self) -> View {
        self.view
    }
    pub fn round(&self) -> Round {
        self.round
    }
    pub fn sender(&self) -> NodeId {
        self.sender
    }
    pub fn view_sig(&self) -> &Signature {
        &self.view_sig
    }
    pub fn data_sig(&self) -> &Signature {
        &self.data_sig
    }
    /// Digest of the full signed encoding; identifies the message for
    /// relay-once and verification caching.
    pub fn digest(&self) -> Digest {
        self.digest
    }

    pub fn signature_count(&self) -> usize {
        2 + self.payload.embedded_signatures()
    }

    pub fn encoded_len(&self) -> usize {
        self.to_canonical_bytes().len()
    }

    /// Bytes covered by `view_sig`.
    pub fn view_signing_bytes(kind: MsgKind, view: View) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u8(0xA1).u8(kind.tag()).u64(view);
        enc.finish()
    }

    /// Bytes covered by `data_sig`.
    pub fn data_signing_bytes(payload: &Payload, view: View) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u8(0xA2);
        payload.encode(&mut enc);
        enc.u64(view);
        enc.finish()
    }
}

impl Canonical for ProtocolMsg {
    fn encode(&self, enc: &mut Encoder) {
        self.payload.encode(enc);
        enc.u64(self.view)
            .u64(self.round)
            .u32(self.sender.0)
            .bytes(&self.view_sig.0)
            .bytes(&self.data_sig.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn genesis_is_fixed() {
        let g1 = Block::genesis();
        let g2 = Block::genesis();
        assert_eq!(g1.digest(), g2.digest());
        assert_eq!(g1.height(), 0);
        assert_eq!(
            Digest::of(&g1.to_canonical_bytes()),
            g1.digest(),
            "re-hashing reproduces the cached digest"
        );
    }

    #[test]
    fn any_field_change_changes_digest() {
        let base = Block::new(1, Digest::ZERO, vec![b"a".to_vec()], NodeId(1), 1, 3, None);
        let variants = [
            Block::new(2, Digest::ZERO, vec![b"a".to_vec()], NodeId(1), 1, 3, None),
            Block::new(1, Digest([1; 32]), vec![b"a".to_vec()], NodeId(1), 1, 3, None),
            Block::new(1, Digest::ZERO, vec![b"b".to_vec()], NodeId(1), 1, 3, None),
            Block::new(1, Digest::ZERO, vec![b"a".to_vec()], NodeId(2), 1, 3, None),
            Block::new(1, Digest::ZERO, vec![b"a".to_vec()], NodeId(1), 2, 3, None),
            Block::new(1, Digest::ZERO, vec![b"a".to_vec()], NodeId(1), 1, 4, None),
            Block::new(1, Digest::ZERO, vec![b"a".to_vec()], NodeId(1), 1, 3, Some(vec![])),
        ];
        for v in &variants {
            assert_ne!(v.digest(), base.digest());
        }
    }

    #[test]
    fn digest_hex_round_trips_through_serde() {
        let d = Digest::of(b"x");
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(s.len(), 66);
        assert!(s.chars().all(|c| !c.is_ascii_uppercase()));
        let back: Digest = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
