//! Vertices of the communication-history DAG.
//!
//! `p_i[r]` is participant `i`'s state at round `r`. A vertex is identified
//! by a [`VertexRef`] whose digest covers the origin, round, payload and the
//! parent references, so an honest participant has exactly one reference
//! per round and any second authenticated reference for the same
//! `(origin, round)` is proof of equivocation.
//!
//! A vertex is either *full* (payload and parents known) or *digest-only*
//! (only the authenticated reference is known, e.g. because it was named as
//! a parent of a vertex we received). Digest-only entries are upgraded when
//! a full copy arrives.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::auth::{Authenticator, Keyring, SigningKey};
use crate::hash::{Digest, Hasher};
use crate::params::ParticipantId;

const VERTEX_DOMAIN: &[u8] = b"dagcast/vertex/v1";

/// `(origin, round, digest)`. Ordering is by round, then origin, then
/// digest, which is the canonical serialization order.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VertexRef {
    pub round: u32,
    pub origin: ParticipantId,
    pub digest: Digest,
}

impl VertexRef {
    pub fn slot(&self) -> crate::dag::Slot {
        crate::dag::Slot {
            origin: self.origin,
            round: self.round,
        }
    }
}

impl fmt::Debug for VertexRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]#{:?}", self.origin, self.round, self.digest)
    }
}

/// A reference together with its origin's authenticator, as carried in
/// parent lists. Carrying the tag lets any holder of a child vertex prove
/// which exact parent variant it descends from.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SignedRef {
    pub vref: VertexRef,
    pub auth: Authenticator,
}

impl SignedRef {
    pub fn verify(&self, ring: &Keyring) -> bool {
        ring.verify(&self.vref, &self.auth)
    }
}

/// Contents known only for full vertices.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VertexBody {
    pub payload: Vec<u8>,
    pub parents: BTreeSet<SignedRef>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Vertex {
    pub vref: VertexRef,
    pub auth: Authenticator,
    /// `None` for digest-only vertices.
    pub body: Option<VertexBody>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VertexError {
    #[error("authenticator of {0:?} does not verify")]
    BadAuthenticator(VertexRef),
    #[error("digest of {0:?} does not match its contents")]
    DigestMismatch(VertexRef),
    #[error("{child:?} names parent {parent:?} from a round that is not earlier")]
    ParentRound { child: VertexRef, parent: VertexRef },
    #[error("parent {parent:?} of {child:?} carries an invalid authenticator")]
    BadParent { child: VertexRef, parent: VertexRef },
}

/// Digest of a vertex body. Parents are hashed in their canonical order.
pub fn content_digest(
    origin: ParticipantId,
    round: u32,
    payload: &[u8],
    parents: &BTreeSet<SignedRef>,
) -> Digest {
    let mut h = Hasher::new(VERTEX_DOMAIN);
    h.u16(origin.0).u32(round).u32(payload.len() as u32).bytes(payload);
    h.u32(parents.len() as u32);
    for p in parents {
        h.u16(p.vref.origin.0)
            .u32(p.vref.round)
            .bytes(&p.vref.digest.0);
    }
    h.finish()
}

impl Vertex {
    /// Builds and authenticates a full vertex for the key owner.
    pub fn create(
        key: &SigningKey,
        round: u32,
        payload: Vec<u8>,
        parents: BTreeSet<SignedRef>,
    ) -> Vertex {
        let origin = key.owner();
        let digest = content_digest(origin, round, &payload, &parents);
        let vref = VertexRef {
            origin,
            round,
            digest,
        };
        Vertex {
            vref,
            auth: key.sign(&vref),
            body: Some(VertexBody { payload, parents }),
        }
    }

    pub fn digest_only(signed: SignedRef) -> Vertex {
        Vertex {
            vref: signed.vref,
            auth: signed.auth,
            body: None,
        }
    }

    pub fn signed_ref(&self) -> SignedRef {
        SignedRef {
            vref: self.vref,
            auth: self.auth,
        }
    }

    /// Same reference with the body dropped.
    pub fn to_digest_only(&self) -> Vertex {
        Vertex::digest_only(self.signed_ref())
    }

    pub fn is_full(&self) -> bool {
        self.body.is_some()
    }

    pub fn origin(&self) -> ParticipantId {
        self.vref.origin
    }

    pub fn round(&self) -> u32 {
        self.vref.round
    }

    pub fn payload(&self) -> Option<&[u8]> {
        self.body.as_ref().map(|b| b.payload.as_slice())
    }

    pub fn parents(&self) -> impl Iterator<Item = &SignedRef> {
        self.body.iter().flat_map(|b| b.parents.iter())
    }

    /// Checks the authenticator and, for full vertices, that the digest
    /// matches the body and that parents are authenticated and strictly
    /// earlier.
    pub fn verify(&self, ring: &Keyring) -> Result<(), VertexError> {
        if !ring.verify(&self.vref, &self.auth) {
            return Err(VertexError::BadAuthenticator(self.vref));
        }
        let Some(body) = &self.body else {
            return Ok(());
        };
        let expect = content_digest(self.vref.origin, self.vref.round, &body.payload, &body.parents);
        if expect != self.vref.digest {
            return Err(VertexError::DigestMismatch(self.vref));
        }
        for p in &body.parents {
            if p.vref.round >= self.vref.round {
                return Err(VertexError::ParentRound {
                    child: self.vref,
                    parent: p.vref,
                });
            }
            if !p.verify(ring) {
                return Err(VertexError::BadParent {
                    child: self.vref,
                    parent: p.vref,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn round_zero_vertex() {
        let ring = Keyring::from_seed(1, 4);
        let key = ring.signing_key(ParticipantId(0));
        let v = Vertex::create(&key, 0, b"v0".to_vec(), BTreeSet::new());
        assert_eq!(v.vref.origin, ParticipantId(0));
        assert_eq!(v.vref.round, 0);
        assert_eq!(
            v.vref.digest,
            content_digest(ParticipantId(0), 0, b"v0", &BTreeSet::new())
        );
        assert!(v.verify(&ring).is_ok());
        assert!(v.to_digest_only().verify(&ring).is_ok());
    }

    #[test]
    fn digest_depends_on_payload_and_parents() {
        let ring = Keyring::from_seed(1, 4);
        let k0 = ring.signing_key(ParticipantId(0));
        let k1 = ring.signing_key(ParticipantId(1));
        let a = Vertex::create(&k0, 0, b"a".to_vec(), BTreeSet::new());
        let b = Vertex::create(&k0, 0, b"b".to_vec(), BTreeSet::new());
        assert_ne!(a.vref.digest, b.vref.digest);
        let c1 = Vertex::create(&k1, 1, vec![], [a.signed_ref()].into());
        let c2 = Vertex::create(&k1, 1, vec![], [b.signed_ref()].into());
        assert_ne!(c1.vref.digest, c2.vref.digest);
    }

    #[test]
    fn tampering_is_detected() {
        let ring = Keyring::from_seed(1, 4);
        let key = ring.signing_key(ParticipantId(3));
        let mut v = Vertex::create(&key, 0, b"x".to_vec(), BTreeSet::new());
        v.body.as_mut().unwrap().payload = b"y".to_vec();
        assert_eq!(v.verify(&ring), Err(VertexError::DigestMismatch(v.vref)));
    }

    #[test]
    fn parents_must_be_earlier() {
        let ring = Keyring::from_seed(1, 4);
        let k0 = ring.signing_key(ParticipantId(0));
        let k1 = ring.signing_key(ParticipantId(1));
        let a = Vertex::create(&k0, 1, vec![], BTreeSet::new());
        let b = Vertex::create(&k1, 1, vec![], [a.signed_ref()].into());
        assert!(matches!(b.verify(&ring), Err(VertexError::ParentRound { .. })));
    }
}
