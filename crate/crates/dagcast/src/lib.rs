//! Simulation, experiments and file formats around `dagcast-core`.
//!
//! * [`netsim`] is the deterministic discrete-event medium with loss,
//!   delay and adversary models.
//! * [`nodes`] adapts the protocol state machines to the simulator.
//! * [`harness`] runs the experiments: loss sweeps, the tolerable-loss
//!   search, scenario replays, ordering agreement and anchor statistics.
//! * [`formats`] writes traces, DAGs and commit logs.
//! * [`config`] is the TOML experiment file.

pub mod config;
pub mod formats;
pub mod harness;
pub mod netsim;
pub mod nodes;
