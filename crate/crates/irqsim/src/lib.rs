//! A discrete-event playground for studying how NIC interrupt handling
//! strategies interfere with a real-time user workload.
//!
//! The simulator runs entirely in virtual time (integer nanoseconds): a load
//! scenario (uniform, Poisson or a replayed capture) drives one of four NIC
//! moderation models, whose interrupts steal CPU time from the workload. The
//! engine reports execution time, interrupt counts and causes, stolen time
//! and per-packet latency, either for a single configuration or over a
//! parameter sweep.

pub mod cli;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod nic;
pub mod pcap;
pub mod rng;
pub mod trace;

pub use engine::{simulate, simulate_sweep, SimulationResult, SweepGrid, WorkloadSpec};
pub use nic::{DelayModel, EndPolicy, InterruptCause, InterruptEvent, ModerationMode, NicConfig};
pub use trace::{Packet, PoissonLoadSpec, Trace, UniformLoadSpec};
