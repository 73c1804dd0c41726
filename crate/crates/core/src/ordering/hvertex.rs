use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::codec::{CodecError, Reader, Writer};
use crate::hash::{digest_of, Digest};
use crate::params::ParticipantId;

const HVERTEX_DOMAIN: &[u8] = b"dagcast/hvertex/v1";
const HVERTEX_MAGIC: &[u8; 3] = b"HV1";

/// Reference to a horizontal vertex. Ordered by step, owner, digest, which
/// is also the total-order tie-break.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HRef {
    pub step: u32,
    pub owner: ParticipantId,
    pub digest: Digest,
}

impl fmt::Debug for HRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H{}@{}#{:?}", self.owner, self.step, self.digest)
    }
}

/// One step of one participant on the horizontal process. Its encoding is
/// the round-0 payload of that participant in the step's dissemination
/// instance.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct HVertex {
    pub owner: ParticipantId,
    pub step: u32,
    pub tx_batch: Vec<Vec<u8>>,
    /// Authentications of step `step - 1` vertices.
    pub back_edges: BTreeSet<HRef>,
}

impl HVertex {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(HVERTEX_MAGIC);
        w.u16(self.owner.0);
        w.u32(self.step);
        w.u32(self.tx_batch.len() as u32);
        for tx in &self.tx_batch {
            w.bytes(tx);
        }
        w.u32(self.back_edges.len() as u32);
        for e in &self.back_edges {
            w.u16(e.owner.0);
            w.u32(e.step);
            w.raw(&e.digest.0);
        }
        w.into_bytes()
    }

    pub fn decode(bytes: &[u8]) -> Result<HVertex, CodecError> {
        let mut r = Reader::new(bytes);
        if r.take(3)? != HVERTEX_MAGIC {
            return Err(CodecError::BadMagic);
        }
        let owner = ParticipantId(r.u16()?);
        let step = r.u32()?;
        let mut tx_batch = Vec::new();
        for _ in 0..r.u32()? {
            tx_batch.push(r.bytes()?.to_vec());
        }
        let mut back_edges = BTreeSet::new();
        for _ in 0..r.u32()? {
            back_edges.insert(HRef {
                owner: ParticipantId(r.u16()?),
                step: r.u32()?,
                digest: r.digest()?,
            });
        }
        r.finish()?;
        Ok(HVertex {
            owner,
            step,
            tx_batch,
            back_edges,
        })
    }

    pub fn digest(&self) -> Digest {
        digest_of(HVERTEX_DOMAIN, &self.encode())
    }

    pub fn href(&self) -> HRef {
        HRef {
            step: self.step,
            owner: self.owner,
            digest: self.digest(),
        }
    }
}

/// Proof that at least `n - f` participants authenticated `subject`. Built
/// from the back edges of the following step.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AuthCertificate {
    pub subject: HRef,
    pub signers: BTreeSet<ParticipantId>,
}
