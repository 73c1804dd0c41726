//! Protocol core for DAG-based non-equivocation data dissemination over lossy
//! broadcast media, plus a two-dimensional DAG ordering layer that derives a
//! partial order (block sequence) and a total order (replicated log).
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO, clocks or
//! randomness: every operation is a deterministic function of its inputs.
//! Simulation, file formats and the command line live in the `dagcast` crate.
//!
//! Layout:
//! * [`params`], [`auth`], [`vertex`] define identities, authenticators and
//!   the per-round vertices `p_i[r]`.
//! * [`dag`] is the grow-only communication-history DAG with merge,
//!   reachability, history completeness and original extraction.
//! * [`equivocation`] finds digest-distinct authenticated variants and
//!   invalidates offenders.
//! * [`dissemination`] is the per-participant round state machine with the
//!   2f+1 advancement rule and the three recovery methods.
//! * [`ordering`] builds the horizontal authentication DAG on top of
//!   per-step dissemination instances, elects and commits anchors and
//!   flattens committed history into blocks and a total order.
//! * [`codec`] is the canonical length-prefixed binary encoding.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod auth;
pub mod codec;
pub mod dag;
pub mod dissemination;
pub mod equivocation;
pub mod hash;
pub mod ordering;
pub mod params;
pub mod vertex;

pub use auth::{Authenticator, Keyring, SigningKey};
pub use dag::{CompletenessReport, DagError, LocalDag, Slot};
pub use dissemination::{
    AdvanceDecision, BroadcastMessage, MessageKind, Outgoing, ParticipantState, ProtocolError,
    ProtocolEvent, RecoveryAction, RecoveryPlan, ResponseTicket, Status,
};
pub use equivocation::{detect, invalidate, EquivocationEvidence, EvidenceError};
pub use hash::Digest;
pub use params::{ParamsError, ParticipantId, ProtocolParams};
pub use vertex::{SignedRef, Vertex, VertexBody, VertexRef};
