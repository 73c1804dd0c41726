//! Equivocation detection and invalidation.
//!
//! Two authenticated vertices with the same origin and round but different
//! digests can only come from an origin that said different things to
//! different peers. Because variants travel inside DAG deltas, evidence
//! propagates implicitly through merges and every participant re-derives
//! its Byzantine set locally instead of trusting accusations.

use alloc::vec::Vec;

use crate::auth::Keyring;
use crate::dag::LocalDag;
use crate::params::ParticipantId;
use crate::vertex::Vertex;

/// Transferable proof that `offender` equivocated at `round`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivocationEvidence {
    pub offender: ParticipantId,
    pub round: u32,
    /// The variant with the smaller digest.
    pub variant_a: Vertex,
    pub variant_b: Vertex,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvidenceError {
    #[error("variants disagree on origin or round")]
    Mismatched,
    #[error("variants carry the same digest")]
    SameDigest,
    #[error("a variant's authenticator does not verify")]
    BadAuthenticator,
}

impl EquivocationEvidence {
    pub fn verify(&self, ring: &Keyring) -> Result<(), EvidenceError> {
        let (a, b) = (&self.variant_a.vref, &self.variant_b.vref);
        if a.origin != self.offender
            || b.origin != self.offender
            || a.round != self.round
            || b.round != self.round
        {
            return Err(EvidenceError::Mismatched);
        }
        if a.digest == b.digest {
            return Err(EvidenceError::SameDigest);
        }
        if !ring.verify(a, &self.variant_a.auth) || !ring.verify(b, &self.variant_b.auth) {
            return Err(EvidenceError::BadAuthenticator);
        }
        Ok(())
    }

    /// Sort key: round, offender, then the digest pair.
    fn key(&self) -> (u32, ParticipantId, [u8; 32], [u8; 32]) {
        (
            self.round,
            self.offender,
            self.variant_a.vref.digest.0,
            self.variant_b.vref.digest.0,
        )
    }
}

/// Every pair of digest-distinct variants held for the same slot, ordered by
/// `(round, origin, digest pair)`. Only authenticated vertices ever enter a
/// [`LocalDag`], so each pair is valid evidence.
pub fn detect(dag: &LocalDag) -> Vec<EquivocationEvidence> {
    let mut out = Vec::new();
    let all: Vec<&Vertex> = dag.vertices().collect();
    // Canonical order groups variants of a slot next to each other.
    let mut i = 0;
    while i < all.len() {
        let slot = all[i].vref.slot();
        let mut j = i + 1;
        while j < all.len() && all[j].vref.slot() == slot {
            j += 1;
        }
        for a in i..j {
            for b in a + 1..j {
                out.push(EquivocationEvidence {
                    offender: slot.origin,
                    round: slot.round,
                    variant_a: all[a].to_digest_only(),
                    variant_b: all[b].to_digest_only(),
                });
            }
        }
        i = j;
    }
    out.sort_by_key(EquivocationEvidence::key);
    out
}

/// Offenders with at least one equivocation in `dag`.
pub fn offenders(dag: &LocalDag) -> Vec<ParticipantId> {
    let mut ids: Vec<ParticipantId> = detect(dag).into_iter().map(|e| e.offender).collect();
    ids.sort();
    ids.dedup();
    ids
}

/// Marks the offender Byzantine and invalidates all of its vertices. The
/// vertices themselves are kept as evidence.
pub fn invalidate(
    dag: &LocalDag,
    ev: &EquivocationEvidence,
    ring: &Keyring,
) -> Result<LocalDag, EvidenceError> {
    let mut out = dag.clone();
    invalidate_in_place(&mut out, ev, ring)?;
    Ok(out)
}

pub fn invalidate_in_place(
    dag: &mut LocalDag,
    ev: &EquivocationEvidence,
    ring: &Keyring,
) -> Result<bool, EvidenceError> {
    ev.verify(ring)?;
    Ok(dag.mark_byzantine(ev.offender))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ProtocolParams;
    use alloc::collections::BTreeSet;

    fn setup() -> (Keyring, Vec<crate::auth::SigningKey>) {
        let ring = Keyring::from_seed(3, 4);
        let keys = (0..4).map(|i| ring.signing_key(ParticipantId(i))).collect();
        (ring, keys)
    }

    fn add(d: &mut LocalDag, ring: &Keyring, v: &Vertex) {
        d.insert(v.clone(), ring, &mut Vec::new()).unwrap();
    }

    #[test]
    fn honest_history_has_no_evidence() {
        let (ring, keys) = setup();
        let mut d = LocalDag::new();
        for k in &keys {
            add(&mut d, &ring, &Vertex::create(k, 0, b"x".to_vec(), BTreeSet::new()));
        }
        assert!(detect(&d).is_empty());
    }

    #[test]
    fn variants_yield_evidence_and_invalidation() {
        let (ring, keys) = setup();
        let a = Vertex::create(&keys[3], 0, b"A".to_vec(), BTreeSet::new());
        let b = Vertex::create(&keys[3], 0, b"B".to_vec(), BTreeSet::new());
        let honest = Vertex::create(&keys[0], 0, b"h".to_vec(), BTreeSet::new());
        let own = Vertex::create(
            &keys[0],
            1,
            alloc::vec![],
            [a.signed_ref(), b.signed_ref(), honest.signed_ref()].into(),
        );
        let mut d = LocalDag::new();
        for v in [&a, &b, &honest, &own] {
            add(&mut d, &ring, v);
        }
        let ev = detect(&d);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].offender, ParticipantId(3));
        assert_eq!(ev[0].round, 0);
        assert!(ev[0].variant_a.vref.digest < ev[0].variant_b.vref.digest);
        assert_eq!(d.extract_originals(&own.vref).unwrap().len(), 3);

        let inv = invalidate(&d, &ev[0], &ring).unwrap();
        assert_eq!(inv.byzantine(), &[ParticipantId(3)].into());
        assert_eq!(inv.extract_originals(&own.vref).unwrap().len(), 1);
        assert_eq!(inv.len(), d.len());
        // Idempotent.
        assert_eq!(invalidate(&inv, &ev[0], &ring).unwrap(), inv);
        // Completeness still counts the offender through its variants.
        let p = ProtocolParams::for_n(4).unwrap();
        let rep = inv.completeness(&own.vref, &p).unwrap();
        assert!(!rep.missing.iter().any(|s| s.origin == ParticipantId(3) && s.round == 0));
    }

    #[test]
    fn bad_evidence_is_rejected() {
        let (ring, keys) = setup();
        let a = Vertex::create(&keys[1], 0, b"A".to_vec(), BTreeSet::new());
        let b = Vertex::create(&keys[1], 0, b"B".to_vec(), BTreeSet::new());
        let d = LocalDag::new();
        let same = EquivocationEvidence {
            offender: ParticipantId(1),
            round: 0,
            variant_a: a.clone(),
            variant_b: a.clone(),
        };
        assert_eq!(invalidate(&d, &same, &ring), Err(EvidenceError::SameDigest));
        let wrong_round = EquivocationEvidence {
            round: 1,
            ..same.clone()
        };
        assert_eq!(invalidate(&d, &wrong_round, &ring), Err(EvidenceError::Mismatched));
        let mut forged = b.clone();
        forged.auth = a.auth;
        let forged = EquivocationEvidence {
            variant_b: forged,
            ..same
        };
        assert_eq!(invalidate(&d, &forged, &ring), Err(EvidenceError::BadAuthenticator));
    }

    #[test]
    fn evidence_travels_through_merge() {
        let (ring, keys) = setup();
        let a = Vertex::create(&keys[3], 0, b"A".to_vec(), BTreeSet::new());
        let b = Vertex::create(&keys[3], 0, b"B".to_vec(), BTreeSet::new());
        let mut d1 = LocalDag::new();
        add(&mut d1, &ring, &a);
        let mut d2 = LocalDag::new();
        add(&mut d2, &ring, &b);
        assert!(detect(&d1).is_empty() && detect(&d2).is_empty());
        let m = d1.merge(&d2, &ring).unwrap();
        assert_eq!(offenders(&m), alloc::vec![ParticipantId(3)]);
    }
}
