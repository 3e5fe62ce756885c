//! Pluggable signing with per-node operation counters.

use std::sync::Arc;

use ed25519_dalek::{Signer as _, SigningKey, Verifier as _, VerifyingKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::types::{NodeId, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigScheme {
    /// Keyed SHA-256 tag. Secrets never leave the keyring, so only the
    /// owning node's `Signer` can produce a tag that verifies.
    #[default]
    Sim,
    Ed25519,
}

enum Keys {
    Sim(Vec<[u8; 32]>),
    Ed25519 {
        signing: Vec<SigningKey>,
        verifying: Vec<VerifyingKey>,
    },
}

/// Pre-installed key material for every node.
pub struct Keyring {
    keys: Keys,
}

impl Keyring {
    pub fn new(scheme: SigScheme, n: usize, seed: u64) -> Arc<Keyring> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6b65_7973);
        let keys = match scheme {
            SigScheme::Sim => {
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    let mut k = [0u8; 32];
                    rand::RngCore::fill_bytes(&mut rng, &mut k);
                    v.push(k);
                }
                Keys::Sim(v)
            }
            SigScheme::Ed25519 => {
                let signing: Vec<SigningKey> =
                    (0..n).map(|_| SigningKey::generate(&mut rng)).collect();
                let verifying = signing.iter().map(|k| k.verifying_key()).collect();
                Keys::Ed25519 { signing, verifying }
            }
        };
        Arc::new(Keyring { keys })
    }

    pub fn scheme(&self) -> SigScheme {
        match self.keys {
            Keys::Sim(_) => SigScheme::Sim,
            Keys::Ed25519 { .. } => SigScheme::Ed25519,
        }
    }

    pub fn len(&self) -> usize {
        match &self.keys {
            Keys::Sim(v) => v.len(),
            Keys::Ed25519 { signing, .. } => signing.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Native signature length in bytes.
    pub fn sig_len(&self) -> usize {
        match self.keys {
            Keys::Sim(_) => 32,
            Keys::Ed25519 { .. } => 64,
        }
    }

    fn sim_tag(key: &[u8; 32], msg: &[u8]) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(b"eesmr-sim-sig");
        h.update(key);
        h.update(msg);
        h.finalize().to_vec()
    }

    fn raw_sign(&self, id: NodeId, msg: &[u8]) -> Signature {
        match &self.keys {
            Keys::Sim(v) => Signature(Self::sim_tag(&v[id.index()], msg)),
            Keys::Ed25519 { signing, .. } => {
                Signature(signing[id.index()].sign(msg).to_bytes().to_vec())
            }
        }
    }

    /// Uncounted verification, for observers outside the protocol.
    pub fn verify_uncounted(&self, id: NodeId, msg: &[u8], sig: &Signature) -> bool {
        if id.index() >= self.len() {
            return false;
        }
        match &self.keys {
            Keys::Sim(v) => Self::sim_tag(&v[id.index()], msg) == sig.0,
            Keys::Ed25519 { verifying, .. } => {
                let Ok(bytes) = <[u8; 64]>::try_from(sig.0.as_slice()) else {
                    return false;
                };
                let s = ed25519_dalek::Signature::from_bytes(&bytes);
                verifying[id.index()].verify(msg, &s).is_ok()
            }
        }
    }

    pub fn signer(self: &Arc<Self>, id: NodeId) -> Signer {
        assert!(id.index() < self.len(), "no key for {id}");
        Signer {
            id,
            keys: Arc::clone(self),
            sign_count: 0,
            verify_count: 0,
        }
    }
}

/// One node's signing handle.
pub struct Signer {
    id: NodeId,
    keys: Arc<Keyring>,
    sign_count: u64,
    verify_count: u64,
}

impl Signer {
    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn sign(&mut self, msg: &[u8]) -> Signature {
        self.sign_count += 1;
        self.keys.raw_sign(self.id, msg)
    }

    pub fn verify(&mut self, id: NodeId, msg: &[u8], sig: &Signature) -> bool {
        self.verify_count += 1;
        self.keys.verify_uncounted(id, msg, sig)
    }

    pub fn sign_count(&self) -> u64 {
        self.sign_count
    }

    pub fn verify_count(&self) -> u64 {
        self.verify_count
    }

    pub fn keyring(&self) -> &Arc<Keyring> {
        &self.keys
    }
}

impl std::fmt::Debug for Signer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Signer")
            .field("id", &self.id)
            .field("sign_count", &self.sign_count)
            .field("verify_count", &self.verify_count)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_key_mismatch() {
        for scheme in [SigScheme::Sim, SigScheme::Ed25519] {
            let ring = Keyring::new(scheme, 3, 7);
            let mut a = ring.signer(NodeId(1));
            let mut b = ring.signer(NodeId(2));
            let sig = a.sign(b"hello");
            assert!(b.verify(NodeId(1), b"hello", &sig));
            assert!(!b.verify(NodeId(2), b"hello", &sig));
            assert!(!b.verify(NodeId(1), b"hellp", &sig));
            assert_eq!(a.sign_count(), 1);
            assert_eq!(b.verify_count(), 3);
        }
    }

    #[test]
    fn keys_are_seeded() {
        let r1 = Keyring::new(SigScheme::Ed25519, 2, 1);
        let r2 = Keyring::new(SigScheme::Ed25519, 2, 1);
        let s1 = r1.signer(NodeId(0)).sign(b"m");
        let s2 = r2.signer(NodeId(0)).sign(b"m");
        assert_eq!(s1, s2);
    }
}
