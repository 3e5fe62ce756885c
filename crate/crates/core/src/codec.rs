//! Canonical byte layout shared by every wire type.
//!
//! All integers are big-endian and fixed width. Variable-length byte strings
//! and lists carry a `u32` length prefix. Digests are written as 32 raw bytes.
//! Optional values are a single presence byte (`0` or `1`) followed by the
//! value when present. Enum variants are prefixed with a one-byte tag.
//!
//! Digests and message sizes are computed over this layout, so it must stay
//! stable across platforms and releases.

use crate::types::Digest;

#[derive(Default, Debug, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
        self
    }

    pub fn digest(&mut self, d: &Digest) -> &mut Self {
        self.buf.extend_from_slice(&d.0);
        self
    }

    pub fn len_prefix(&mut self, len: usize) -> &mut Self {
        self.u32(len as u32)
    }

    pub fn option<T>(&mut self, v: Option<&T>, f: impl FnOnce(&mut Self, &T)) -> &mut Self {
        match v {
            None => {
                self.u8(0);
            }
            Some(inner) => {
                self.u8(1);
                f(self, inner);
            }
        }
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }
}

/// Types with a canonical encoding.
pub trait Canonical {
    fn encode(&self, enc: &mut Encoder);

    fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        self.encode(&mut enc);
        enc.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_big_endian_and_length_prefixed() {
        let mut enc = Encoder::new();
        enc.u8(7).u32(1).u64(2).bytes(b"ab");
        assert_eq!(
            enc.finish(),
            vec![7, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 0, 2, b'a', b'b']
        );
    }

    #[test]
    fn option_presence_byte() {
        let mut enc = Encoder::new();
        enc.option(None::<&u64>, |e, v| {
            e.u64(*v);
        });
        enc.option(Some(&3u64), |e, v| {
            e.u64(*v);
        });
        assert_eq!(enc.finish(), vec![0, 1, 0, 0, 0, 0, 0, 0, 0, 3]);
    }
}
