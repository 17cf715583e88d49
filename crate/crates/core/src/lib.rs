//! Decentralized storage and fusion of uncertain semantic annotations for
//! robot swarms, at desk scale.
//!
//! The crate has three largely independent layers:
//!
//! * combinatorics of plurality voting ([`ensemble`]) and the bin-packing
//!   cost model for distributed storage ([`binpack`]);
//! * the shared tuple store each agent participates in ([`mesh`]);
//! * a deterministic discrete-time world and the per-agent control loop
//!   that wires everything together ([`env`], [`sim`]), plus replicate
//!   aggregation into figure-ready CSV ([`report`]).
//!
//! Everything is seeded and single-threaded per run: identical
//! configuration and seed produce bit-identical traces.

pub mod binpack;
pub mod classes;
pub mod ensemble;
pub mod env;
pub mod mesh;
pub mod numeric;
pub mod report;
pub mod sim;

pub use classes::{ClassId, ClassModel};
pub use env::SimConfig;
pub use sim::{run_experiment, MetricsFrame, RunOutput};
