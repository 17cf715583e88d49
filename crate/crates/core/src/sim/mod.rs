//! The per-agent control loop and the lock-step experiment driver.

pub mod agent;
pub mod metrics;
pub mod output;
pub mod runner;

pub use agent::{Agent, QueryLedgerEntry, QueryState};
pub use metrics::{
    bandwidth_per_agent, bandwidth_series, consolidation_coverage, map_accuracy,
    nodeid_hash_histograms, observation_coverage, ConsolidationEvent, MetricsFrame,
    ObservationEvent, PackingSnapshot, TupleRecord,
};
pub use runner::{run_experiment, AuditSummary, RunOutput, SimError};
