//! Canonical length-prefixed binary encoding.
//!
//! All integers are little-endian. A DAG is encoded as
//!
//! ```text
//! magic "DGC1"
//! u32 vertex count, then per vertex: u32 byte length, vertex bytes
//! u32 byzantine count, then u16 ids
//! u32 invalidated count, then refs
//! ```
//!
//! A ref is `u16 origin | u32 round | [u8; 32] digest`. A vertex is
//! `ref | [u8; 32] tag | u8 kind` followed, for kind 1 (full), by
//! `u32 payload length | payload | u32 parent count | (ref | tag)*`.
//! Vertices appear in `(round, origin, digest)` order, so equal DAGs encode
//! to equal bytes.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::auth::{Authenticator, Keyring};
use crate::dag::{DagError, LocalDag};
use crate::hash::Digest;
use crate::params::ParticipantId;
use crate::vertex::{SignedRef, Vertex, VertexBody, VertexRef};

pub const DAG_MAGIC: &[u8; 4] = b"DGC1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("input ended after {0} bytes")]
    Truncated(usize),
    #[error("bad magic")]
    BadMagic,
    #[error("unknown vertex kind {0}")]
    BadKind(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("length prefix does not match the encoded vertex")]
    LengthMismatch,
    #[error(transparent)]
    Dag(#[from] DagError),
}

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn raw(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// `u32` length followed by the bytes.
    pub fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.raw(b);
    }

    pub fn vref(&mut self, r: &VertexRef) {
        self.u16(r.origin.0);
        self.u32(r.round);
        self.raw(&r.digest.0);
    }

    pub fn signed(&mut self, s: &SignedRef) {
        self.vref(&s.vref);
        self.raw(&s.auth.0);
    }

    pub fn vertex(&mut self, v: &Vertex) {
        self.signed(&v.signed_ref());
        match &v.body {
            None => self.u8(0),
            Some(body) => {
                self.u8(1);
                self.bytes(&body.payload);
                self.u32(body.parents.len() as u32);
                for p in &body.parents {
                    self.signed(p);
                }
            }
        }
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(&self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::Trailing(n)),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated(self.buf.len()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn digest(&mut self) -> Result<Digest, CodecError> {
        Ok(Digest(self.array()?))
    }

    pub fn vref(&mut self) -> Result<VertexRef, CodecError> {
        Ok(VertexRef {
            origin: ParticipantId(self.u16()?),
            round: self.u32()?,
            digest: self.digest()?,
        })
    }

    pub fn signed(&mut self) -> Result<SignedRef, CodecError> {
        Ok(SignedRef {
            vref: self.vref()?,
            auth: Authenticator(self.array()?),
        })
    }

    pub fn vertex(&mut self) -> Result<Vertex, CodecError> {
        let s = self.signed()?;
        let body = match self.u8()? {
            0 => None,
            1 => {
                let payload = self.bytes()?.to_vec();
                let count = self.u32()? as usize;
                let mut parents = BTreeSet::new();
                for _ in 0..count {
                    parents.insert(self.signed()?);
                }
                Some(VertexBody { payload, parents })
            }
            k => return Err(CodecError::BadKind(k)),
        };
        Ok(Vertex {
            vref: s.vref,
            auth: s.auth,
            body,
        })
    }
}

pub fn encode_vertex(v: &Vertex) -> Vec<u8> {
    let mut w = Writer::new();
    w.vertex(v);
    w.into_bytes()
}

pub fn decode_vertex(bytes: &[u8]) -> Result<Vertex, CodecError> {
    let mut r = Reader::new(bytes);
    let v = r.vertex()?;
    r.finish()?;
    Ok(v)
}

pub fn encode_dag(dag: &LocalDag) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(DAG_MAGIC);
    w.u32(dag.len() as u32);
    for v in dag.vertices() {
        w.bytes(&encode_vertex(v));
    }
    w.u32(dag.byzantine().len() as u32);
    for id in dag.byzantine() {
        w.u16(id.0);
    }
    w.u32(dag.invalidated().len() as u32);
    for r in dag.invalidated() {
        w.vref(r);
    }
    w.into_bytes()
}

/// Decodes and verifies a DAG. Any vertex that fails verification rejects
/// the whole input.
pub fn decode_dag(bytes: &[u8], ring: &Keyring) -> Result<LocalDag, CodecError> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != DAG_MAGIC {
        return Err(CodecError::BadMagic);
    }
    let count = r.u32()? as usize;
    let mut vertices = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let chunk = r.bytes()?;
        vertices.push(decode_vertex(chunk).map_err(|e| match e {
            CodecError::Trailing(_) => CodecError::LengthMismatch,
            e => e,
        })?);
    }
    let mut byzantine = Vec::new();
    for _ in 0..r.u32()? {
        byzantine.push(ParticipantId(r.u16()?));
    }
    let mut invalidated = Vec::new();
    for _ in 0..r.u32()? {
        invalidated.push(r.vref()?);
    }
    r.finish()?;
    Ok(LocalDag::from_parts(vertices, byzantine, invalidated, ring)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Keyring, LocalDag) {
        let ring = Keyring::from_seed(5, 4);
        let keys: Vec<_> = (0..4).map(|i| ring.signing_key(ParticipantId(i))).collect();
        let r0: Vec<Vertex> = keys
            .iter()
            .map(|k| Vertex::create(k, 0, alloc::vec![k.owner().0 as u8; 3], BTreeSet::new()))
            .collect();
        let own = Vertex::create(&keys[0], 1, Vec::new(), r0.iter().map(|v| v.signed_ref()).collect());
        let mut d = LocalDag::new();
        // p3's original only known by reference.
        for v in r0.iter().take(3).chain([&own]) {
            d.insert(v.clone(), &ring, &mut Vec::new()).unwrap();
        }
        (ring, d)
    }

    #[test]
    fn dag_round_trip_is_canonical() {
        let (ring, d) = sample();
        let bytes = encode_dag(&d);
        let back = decode_dag(&bytes, &ring).unwrap();
        assert_eq!(back, d);
        assert_eq!(encode_dag(&back), bytes);
    }

    #[test]
    fn truncation_and_trailing_are_errors() {
        let (ring, d) = sample();
        let bytes = encode_dag(&d);
        assert!(matches!(decode_dag(&bytes[..bytes.len() - 1], &ring), Err(CodecError::Truncated(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert_eq!(decode_dag(&longer, &ring), Err(CodecError::Trailing(1)));
        assert_eq!(decode_dag(b"XXXX", &ring), Err(CodecError::BadMagic));
    }

    #[test]
    fn forged_bytes_fail_verification() {
        let (_, d) = sample();
        let other_ring = Keyring::from_seed(6, 4);
        assert!(matches!(decode_dag(&encode_dag(&d), &other_ring), Err(CodecError::Dag(_))));
    }
}
