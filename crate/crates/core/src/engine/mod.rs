// SPDX-License-Identifier: Apache-2.0
//! Deterministic discrete-event simulation of a flood-routed network.
//!
//! Events are ordered by `(time, sequence)`, and the only randomness is a
//! seeded ChaCha8 stream consumed by the traffic generator, so a seed
//! fixes the whole run.

mod scheduler;
mod sim;
mod time;
mod traffic;

pub use scheduler::{EventId, PastEvent, Scheduler};
pub use sim::{run, CircuitError, CircuitWalk, Corruption, SimError, Simulation};
pub use time::SimTime;
pub use traffic::{CallSpec, PoissonTraffic, SimConfig, TrafficModel};
