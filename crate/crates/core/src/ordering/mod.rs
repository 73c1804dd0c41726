//! Two-dimensional ordering layer.
//!
//! Each participant proposes one [`HVertex`] per step. The vertex is the
//! round-0 payload of that participant in the step's own dissemination
//! instance, so the vertical dimension is a [`ParticipantState`] per step
//! and the horizontal dimension is the [`HorizontalDag`] of proposals.
//! Once a participant's instance for step `t` is complete it authenticates
//! at least `n - f` step-`t` proposals and carries those authentications as
//! back edges of its step-`t+1` proposal.
//!
//! Anchors sit on even steps. The anchor of step `t` is decided by looking
//! at step `t+2` and commits with `f + 1` supporters at step `t+1`;
//! committing it also commits earlier undecided anchors it reaches.
//! Committed blocks are flattened by a deterministic topological sort.
//!
//! [`ParticipantState`]: crate::dissemination::ParticipantState

mod commit;
mod hdag;
mod hvertex;
mod node;

pub use commit::{elect_anchor, is_anchor_step, partial_order, total_order, Anchor, CommitRecord, Committer};
pub use hdag::HorizontalDag;
pub use hvertex::{AuthCertificate, HRef, HVertex};
pub use node::{authenticate, OrderingConfig, OrderingEvent, OrderingMessage, OrderingNode, OrderingOutgoing};
