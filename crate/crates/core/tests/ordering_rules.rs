use std::collections::BTreeSet;

use dagcast_core::ordering::{authenticate, elect_anchor, HRef, HVertex, HorizontalDag};
use dagcast_core::{Keyring, ParticipantId, ParticipantState, ProtocolParams, SignedRef, Vertex};

fn pid(i: u16) -> ParticipantId {
    ParticipantId(i)
}

fn hv(owner: u16, step: u32, tag: u8, back_edges: BTreeSet<HRef>) -> HVertex {
    HVertex {
        owner: pid(owner),
        step,
        tx_batch: vec![vec![owner as u8, step as u8, tag]],
        back_edges,
    }
}

/// Pearson statistic against the uniform distribution.
fn chi_square(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum()
}

#[test]
fn coin_is_uniform_over_ten_thousand_steps() {
    // 0.001 critical values for 3, 6 and 9 degrees of freedom.
    for (n, crit) in [(4usize, 16.27), (7, 22.46), (10, 27.88)] {
        let mut counts = vec![0u64; n];
        for step in 0..10_000u32 {
            counts[elect_anchor(42, step, n).index()] += 1;
        }
        let x2 = chi_square(&counts);
        assert!(x2 < crit, "n = {n}: chi-square {x2:.2} >= {crit}");
    }
}

fn subsets(n: u16, k: usize) -> Vec<BTreeSet<u16>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

/// Every step-2 vertex reaches an anchor that has exactly `f + 1`
/// supporters at step 1, whatever quorum of step-1 vertices it cites.
fn reachability_holds(n: u16) {
    let p = ProtocolParams::for_n(n as usize).unwrap();
    let q = p.auth_quorum();
    let anchor_owner = 0u16;
    for supporters in subsets(n, p.f + 1) {
        let mut view = HorizontalDag::new(p);
        let s0: Vec<HRef> = (0..n).map(|o| {
            let v = hv(o, 0, 0, BTreeSet::new());
            let r = v.href();
            view.insert(v);
            r
        }).collect();
        let others: Vec<HRef> = s0.iter().filter(|r| r.owner.0 != anchor_owner).copied().collect();
        let mut s1 = Vec::new();
        for o in 0..n {
            let mut edges: BTreeSet<HRef> = others.iter().take(q).copied().collect();
            if supporters.contains(&o) {
                edges.insert(s0[anchor_owner as usize]);
            }
            let v = hv(o, 1, 0, edges);
            s1.push(v.href());
            assert_eq!(view.insert(v).len(), 1);
        }
        assert_eq!(view.supporters(&s0[0]).len(), p.f + 1);
        for cited in subsets(n, q) {
            let v = hv(0, 2, 1, cited.iter().map(|i| s1[*i as usize]).collect());
            let r = v.href();
            view.insert(v);
            assert!(view.reachable(&r, &s0[0]), "n = {n}, supporters {supporters:?}, cited {cited:?}");
        }
    }
}

#[test]
fn committed_anchor_is_reachable_from_every_later_quorum() {
    reachability_holds(4);
    reachability_holds(7);
}

#[test]
fn back_edge_threshold_is_n_minus_f() {
    for n in [4u16, 5, 7] {
        let p = ProtocolParams::for_n(n as usize).unwrap();
        let view = HorizontalDag::new(p);
        let prev: Vec<HRef> = (0..n).map(|o| hv(o, 0, 0, BTreeSet::new()).href()).collect();
        let with = |k: usize| hv(0, 1, 0, prev.iter().take(k).copied().collect());
        assert!(view.well_formed(&with(p.auth_quorum())));
        assert!(!view.well_formed(&with(p.auth_quorum() - 1)));
    }
    // Where n = 3f + 1 the threshold is exactly 2f + 1.
    let p = ProtocolParams::for_n(4).unwrap();
    assert_eq!(p.auth_quorum(), 2 * p.f + 1);
}

/// State of p0 at step 0 after receiving round-0 vertices and round-1
/// vertices of p1 and p2 that cite all of them.
fn observer(twin: bool) -> ParticipantState {
    let n = 4;
    let p = ProtocolParams::for_n(n).unwrap();
    let ring = Keyring::from_seed(8, n);
    let mut st = ParticipantState::new(p, ring.signing_key(pid(0)), ring.clone());
    st.start_round0(hv(0, 0, 0, BTreeSet::new()).encode()).unwrap();
    let mut round0: Vec<Vertex> = (1..4u16)
        .map(|o| Vertex::create(&ring.signing_key(pid(o)), 0, hv(o, 0, 0, BTreeSet::new()).encode(), BTreeSet::new()))
        .collect();
    if twin {
        round0.push(Vertex::create(&ring.signing_key(pid(3)), 0, hv(3, 0, 1, BTreeSet::new()).encode(), BTreeSet::new()));
    }
    let own = st.dag().vertices().next().unwrap().signed_ref();
    let cite: BTreeSet<SignedRef> = round0.iter().map(|v| v.signed_ref()).chain([own]).collect();
    let round1: Vec<Vertex> = (1..3u16)
        .map(|o| Vertex::create(&ring.signing_key(pid(o)), 1, vec![o as u8], cite.clone()))
        .collect();
    let all: Vec<Vertex> = round0.into_iter().chain(round1).collect();
    st.absorb(&all).unwrap();
    st
}

#[test]
fn equivocal_batch_is_not_authenticated() {
    let owners = |st: &ParticipantState| -> BTreeSet<u16> { authenticate(st, 0).iter().map(|r| r.owner.0).collect() };
    let clean = observer(false);
    assert!(owners(&clean).contains(&3));
    let twin = observer(true);
    assert!(twin.dag().byzantine().contains(&pid(3)));
    assert!(!owners(&twin).contains(&3));
    let mut rest = owners(&clean);
    rest.remove(&3);
    assert_eq!(owners(&twin), rest);
}
