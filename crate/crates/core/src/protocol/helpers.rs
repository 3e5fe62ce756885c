//! Message construction, matching, certificates and the lock rule.

use std::collections::BTreeSet;

use crate::chain::ChainStore;
use crate::crypto::{Keyring, Signer};
use crate::error::{ChainError, QcError};
use crate::types::{Block, Digest, MsgKind, NodeId, Payload, ProtocolMsg, QuorumCert, Round, View};

/// Builds a message signed twice by `signer`: once over `(kind, view)` and
/// once over `(payload, view)`.
pub fn make_msg(signer: &mut Signer, payload: Payload, view: View, round: Round) -> ProtocolMsg {
    let view_sig = signer.sign(&ProtocolMsg::view_signing_bytes(payload.kind(), view));
    let data_sig = signer.sign(&ProtocolMsg::data_signing_bytes(&payload, view));
    ProtocolMsg::assemble(payload, view, round, signer.id(), view_sig, data_sig)
}

/// Checks both signatures of `msg` under its sender's key (two verifications).
pub fn verify_msg(signer: &mut Signer, msg: &ProtocolMsg) -> bool {
    let a = signer.verify(
        msg.sender(),
        &ProtocolMsg::view_signing_bytes(msg.kind(), msg.view()),
        msg.view_sig(),
    );
    let b = signer.verify(
        msg.sender(),
        &ProtocolMsg::data_signing_bytes(msg.payload(), msg.view()),
        msg.data_sig(),
    );
    a && b
}

/// Uncounted variant of [`verify_msg`] for observers.
pub fn verify_msg_uncounted(keys: &Keyring, msg: &ProtocolMsg) -> bool {
    keys.verify_uncounted(
        msg.sender(),
        &ProtocolMsg::view_signing_bytes(msg.kind(), msg.view()),
        msg.view_sig(),
    ) && keys.verify_uncounted(
        msg.sender(),
        &ProtocolMsg::data_signing_bytes(msg.payload(), msg.view()),
        msg.data_sig(),
    )
}

pub fn create_proposal(
    store: &ChainStore,
    parent: &Digest,
    cmds: Vec<Vec<u8>>,
    proposer: NodeId,
    view: View,
    round: Round,
) -> Result<Block, ChainError> {
    let p = store.get(parent).ok_or(ChainError::UnknownParent(*parent))?;
    Ok(Block::new(
        p.height() + 1,
        p.digest(),
        cmds,
        proposer,
        view,
        round,
        None,
    ))
}

pub fn matching_msg(m: &ProtocolMsg, kind: MsgKind, view: View) -> bool {
    m.kind() == kind && m.view() == view
}

pub fn matching_qc(qc: &QuorumCert, kind: MsgKind, view: View) -> bool {
    qc.kind == kind && qc.view == view
}

/// The datum a certificate signature covers, or `None` when the message
/// kind is not certifiable.
fn qc_subject(m: &ProtocolMsg) -> Option<Digest> {
    match m.payload() {
        Payload::Blame { .. } => Some(Digest::ZERO),
        Payload::Certify { subject } | Payload::VoteMsg { subject } => Some(*subject),
        _ => None,
    }
}

/// Bytes each signer of a certificate signed.
pub fn qc_signing_bytes(kind: MsgKind, view: View, subject: &Digest) -> Vec<u8> {
    match kind {
        MsgKind::Blame => ProtocolMsg::view_signing_bytes(kind, view),
        MsgKind::Certify => {
            ProtocolMsg::data_signing_bytes(&Payload::Certify { subject: *subject }, view)
        }
        MsgKind::VoteMsg => {
            ProtocolMsg::data_signing_bytes(&Payload::VoteMsg { subject: *subject }, view)
        }
        _ => Vec::new(),
    }
}

/// Combines `quorum` or more matching messages into a certificate. Blame
/// certificates carry view signatures; certify and vote certificates carry
/// data signatures over their common subject. When `check` is given, every
/// signature is re-verified with it.
pub fn form_qc(
    msgs: &[&ProtocolMsg],
    kind: MsgKind,
    view: View,
    quorum: usize,
    mut check: Option<&mut Signer>,
) -> Result<QuorumCert, QcError> {
    let mut seen = BTreeSet::new();
    let mut subject = None;
    let mut signers = Vec::with_capacity(msgs.len());
    let mut sigs = Vec::with_capacity(msgs.len());
    for m in msgs {
        if !matching_msg(m, kind, view) {
            return Err(QcError::Mismatch(m.sender(), kind, view));
        }
        let s = qc_subject(m).ok_or(QcError::Mismatch(m.sender(), kind, view))?;
        match subject {
            None => subject = Some(s),
            Some(prev) if prev != s => return Err(QcError::Mismatch(m.sender(), kind, view)),
            _ => {}
        }
        if !seen.insert(m.sender()) {
            return Err(QcError::DuplicateSigner(m.sender()));
        }
        if let Some(signer) = check.as_deref_mut() {
            if !verify_msg(signer, m) {
                return Err(QcError::BadSignature(m.sender()));
            }
        }
        signers.push(m.sender());
        sigs.push(if kind == MsgKind::Blame {
            m.view_sig().clone()
        } else {
            m.data_sig().clone()
        });
    }
    if signers.len() < quorum {
        return Err(QcError::Insufficient {
            got: signers.len(),
            need: quorum,
        });
    }
    Ok(QuorumCert {
        kind,
        view,
        subject: subject.unwrap_or(Digest::ZERO),
        signers,
        sigs,
    })
}

/// Validates a certificate: size, distinct signers and every signature.
pub fn verify_qc(signer: &mut Signer, qc: &QuorumCert, quorum: usize) -> Result<(), QcError> {
    if qc.signers.len() != qc.sigs.len() || qc.signers.len() < quorum {
        return Err(QcError::Insufficient {
            got: qc.signers.len().min(qc.sigs.len()),
            need: quorum,
        });
    }
    let mut seen = BTreeSet::new();
    for id in &qc.signers {
        if !seen.insert(*id) {
            return Err(QcError::DuplicateSigner(*id));
        }
    }
    let bytes = qc_signing_bytes(qc.kind, qc.view, &qc.subject);
    if bytes.is_empty() {
        return Err(QcError::Mismatch(qc.signers[0], qc.kind, qc.view));
    }
    for (id, sig) in qc.signers.iter().zip(&qc.sigs) {
        if !signer.verify(*id, &bytes, sig) {
            return Err(QcError::BadSignature(*id));
        }
    }
    Ok(())
}

/// Returns `candidate` iff it differs from `locked` in view or round and
/// extends it; otherwise keeps `locked`.
pub fn lock_compare<'a>(locked: &'a Block, candidate: &'a Block, store: &ChainStore) -> &'a Block {
    let extends = store.extends(&candidate.digest(), &locked.digest());
    if locked.view() != candidate.view() && extends {
        return candidate;
    }
    if locked.round() != candidate.round() && extends {
        return candidate;
    }
    locked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SigScheme;

    fn ring(n: usize) -> std::sync::Arc<Keyring> {
        Keyring::new(SigScheme::Sim, n, 3)
    }

    #[test]
    fn make_msg_signs_twice_and_verifies() {
        let keys = ring(3);
        let mut s1 = keys.signer(NodeId(1));
        let mut s2 = keys.signer(NodeId(2));
        let b = Block::new(1, Block::genesis().digest(), vec![], NodeId(1), 1, 3, None);
        let m = make_msg(&mut s1, Payload::Propose { block: b, justify: None }, 1, 3);
        assert_eq!(s1.sign_count(), 2);
        assert_eq!(m.view(), 1);
        assert!(verify_msg(&mut s2, &m));
        assert_eq!(s2.verify_count(), 2);
    }

    #[test]
    fn qc_rules() {
        let keys = ring(7);
        let blames: Vec<ProtocolMsg> = (0..4)
            .map(|i| {
                let mut s = keys.signer(NodeId(i));
                make_msg(&mut s, Payload::Blame { proof: None }, 3, 0)
            })
            .collect();
        let refs: Vec<&ProtocolMsg> = blames.iter().collect();
        let mut checker = keys.signer(NodeId(6));
        let qc = form_qc(&refs, MsgKind::Blame, 3, 4, Some(&mut checker)).unwrap();
        assert!(verify_qc(&mut checker, &qc, 4).is_ok());
        assert!(matching_qc(&qc, MsgKind::Blame, 3));
        assert!(!matching_qc(&qc, MsgKind::Blame, 4));
        assert!(matches!(
            form_qc(&refs[..3], MsgKind::Blame, 3, 4, None),
            Err(QcError::Insufficient { got: 3, need: 4 })
        ));
        let dup = vec![refs[0], refs[1], refs[2], refs[0]];
        assert!(matches!(
            form_qc(&dup, MsgKind::Blame, 3, 4, None),
            Err(QcError::DuplicateSigner(NodeId(0)))
        ));
    }

    #[test]
    fn lock_compare_branches() {
        let mut store = ChainStore::new();
        let g = Block::genesis();
        let b = Block::new(1, g.digest(), vec![], NodeId(1), 1, 3, None);
        let b2 = Block::new(2, b.digest(), vec![], NodeId(1), 1, 4, None);
        let same = Block::new(1, g.digest(), vec![vec![9]], NodeId(1), 1, 3, None);
        let fork = Block::new(1, g.digest(), vec![vec![8]], NodeId(1), 1, 5, None);
        for x in [&b, &b2, &same, &fork] {
            store.insert(x.clone());
        }
        assert_eq!(lock_compare(&b, &b2, &store).digest(), b2.digest());
        assert_eq!(lock_compare(&b, &same, &store).digest(), b.digest());
        assert_eq!(lock_compare(&b, &fork, &store).digest(), b.digest());
    }
}
