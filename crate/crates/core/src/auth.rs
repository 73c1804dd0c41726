//! Unforgeable message authenticators.
//!
//! Messages in the threat model can be lost but never forged. Real
//! signatures are outside the scope of this crate, so authenticators are
//! keyed SHA-256 tags over `(origin, round, digest)`. The [`Keyring`] plays
//! the role of a PKI: it verifies every tag, while a [`SigningKey`] for a
//! given participant is only ever handed to that participant's state
//! machine. Verification is deterministic.

use alloc::vec::Vec;
use core::fmt;

use crate::hash::{Digest, Hasher};
use crate::params::ParticipantId;
use crate::vertex::VertexRef;

const KEY_DOMAIN: &[u8] = b"dagcast/key/v1";
const TAG_DOMAIN: &[u8] = b"dagcast/tag/v1";
const SUBKEY_DOMAIN: &[u8] = b"dagcast/subkey/v1";

fn subkey(secret: &[u8; 32], domain: u64) -> [u8; 32] {
    let mut h = Hasher::new(SUBKEY_DOMAIN);
    h.bytes(secret).u64(domain);
    h.finish().0
}

/// Tag binding an origin to one `(round, digest)`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Authenticator(pub [u8; 32]);

impl fmt::Debug for Authenticator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tag:{:?}", Digest(self.0))
    }
}

/// Secret key of one participant.
#[derive(Clone)]
pub struct SigningKey {
    owner: ParticipantId,
    secret: [u8; 32],
}

impl SigningKey {
    pub fn owner(&self) -> ParticipantId {
        self.owner
    }

    /// Tags a reference. Only references whose origin is the key owner can be
    /// signed.
    pub fn sign(&self, vref: &VertexRef) -> Authenticator {
        assert_eq!(
            vref.origin, self.owner,
            "a participant can only authenticate its own vertices"
        );
        Authenticator(tag(&self.secret, vref))
    }

    /// Independent key for a sub-protocol instance. Matches
    /// [`Keyring::derive`] with the same `domain`.
    pub fn derive(&self, domain: u64) -> SigningKey {
        SigningKey {
            owner: self.owner,
            secret: subkey(&self.secret, domain),
        }
    }
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningKey")
            .field("owner", &self.owner)
            .finish_non_exhaustive()
    }
}

/// Verification registry for all participants of a run.
#[derive(Clone)]
pub struct Keyring {
    secrets: Vec<[u8; 32]>,
}

impl Keyring {
    /// Derives `n` keys from a run seed.
    pub fn from_seed(seed: u64, n: usize) -> Self {
        let secrets = (0..n as u32)
            .map(|i| {
                let mut h = Hasher::new(KEY_DOMAIN);
                h.u64(seed).u32(i);
                h.finish().0
            })
            .collect();
        Keyring { secrets }
    }

    pub fn len(&self) -> usize {
        self.secrets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.secrets.is_empty()
    }

    /// Hands out the signing key of `id`. The simulator calls this exactly
    /// once per participant.
    pub fn signing_key(&self, id: ParticipantId) -> SigningKey {
        SigningKey {
            owner: id,
            secret: self.secrets[id.index()],
        }
    }

    /// Keyring of a sub-protocol instance, so that vertices of one instance
    /// never verify in another.
    pub fn derive(&self, domain: u64) -> Keyring {
        Keyring {
            secrets: self.secrets.iter().map(|s| subkey(s, domain)).collect(),
        }
    }

    pub fn verify(&self, vref: &VertexRef, auth: &Authenticator) -> bool {
        match self.secrets.get(vref.origin.index()) {
            Some(secret) => tag(secret, vref) == auth.0,
            None => false,
        }
    }
}

impl fmt::Debug for Keyring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keyring")
            .field("participants", &self.secrets.len())
            .finish()
    }
}

fn tag(secret: &[u8; 32], vref: &VertexRef) -> [u8; 32] {
    let mut h = Hasher::new(TAG_DOMAIN);
    h.bytes(secret)
        .u16(vref.origin.0)
        .u32(vref.round)
        .bytes(&vref.digest.0);
    h.finish().0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vref(origin: u16, round: u32, d: u8) -> VertexRef {
        VertexRef {
            origin: ParticipantId(origin),
            round,
            digest: Digest([d; 32]),
        }
    }

    #[test]
    fn sign_and_verify() {
        let ring = Keyring::from_seed(7, 4);
        let key = ring.signing_key(ParticipantId(2));
        let r = vref(2, 1, 9);
        let tag = key.sign(&r);
        assert!(ring.verify(&r, &tag));
        assert!(!ring.verify(&vref(2, 1, 8), &tag));
        assert!(!ring.verify(&vref(2, 2, 9), &tag));
    }

    #[test]
    fn other_keys_do_not_verify() {
        let ring = Keyring::from_seed(7, 4);
        let other = Keyring::from_seed(8, 4);
        let r = vref(1, 0, 3);
        let tag = other.signing_key(ParticipantId(1)).sign(&r);
        assert!(!ring.verify(&r, &tag));
    }

    #[test]
    #[should_panic(expected = "own vertices")]
    fn cannot_sign_for_others() {
        let ring = Keyring::from_seed(1, 4);
        ring.signing_key(ParticipantId(0)).sign(&vref(1, 0, 0));
    }

    #[test]
    fn derived_keys_are_separated() {
        let ring = Keyring::from_seed(7, 4);
        let r = vref(1, 0, 3);
        let k = ring.signing_key(ParticipantId(1));
        let sub = ring.derive(5);
        assert!(sub.verify(&r, &k.derive(5).sign(&r)));
        assert!(!sub.verify(&r, &k.sign(&r)));
        assert!(!ring.derive(6).verify(&r, &k.derive(5).sign(&r)));
    }

    #[test]
    fn unknown_origin_fails() {
        let ring = Keyring::from_seed(1, 2);
        assert!(!ring.verify(&vref(5, 0, 0), &Authenticator([0; 32])));
    }
}
