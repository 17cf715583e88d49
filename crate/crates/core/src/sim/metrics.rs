//! Per-step metrics and their post-hoc recomputation from event logs.
//!
//! The runner fills one [`MetricsFrame`] per step online; the functions at
//! the bottom recompute the same quantities from the raw event logs, which
//! gives the tests an independent route to cross-check the frames.

use std::collections::{BTreeMap, BTreeSet};

use crate::classes::ClassId;
use crate::mesh::TupleId;

use super::runner::RunOutput;

/// One row of the simulation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsFrame {
    pub step: u64,
    /// Fraction of objects with at least one recorded annotation so far.
    pub observed_coverage: f64,
    /// Fraction of objects with a consolidated annotation in the store.
    pub consolidation_coverage: f64,
    /// Fraction of live consolidated annotations that are correct; absent
    /// while the map is empty.
    pub map_accuracy: Option<f64>,
    /// Bytes broadcast by all agents this step.
    pub bytes_sent_total: u64,
    pub realized_cost: f64,
    pub optimal_cost: f64,
    /// Reference worst-case construction.
    pub worst_cost: f64,
    /// True adversarial maximum.
    pub worst_cost_exact: f64,
}

/// An agent recorded an annotation of an object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationEvent {
    pub step: u64,
    pub agent: u16,
    pub object: u32,
    pub label: ClassId,
}

/// An agent consolidated a location by plurality vote.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsolidationEvent {
    pub step: u64,
    pub agent: u16,
    /// Ground-truth object at the voted location, when resolvable.
    pub object: Option<u32>,
    pub label: ClassId,
    pub votes: u32,
    pub tuple: TupleId,
}

/// Lifecycle of one tuple, from creation to erasure (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct TupleRecord {
    pub id: TupleId,
    pub class: ClassId,
    pub consolidated: bool,
    pub object: Option<u32>,
    pub created_step: u64,
    pub erased_step: Option<u64>,
}

impl TupleRecord {
    pub fn live_at(&self, step: u64) -> bool {
        self.created_step <= step && self.erased_step.is_none_or(|e| e > step)
    }
}

/// Per-agent per-step snapshot for the packing audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingSnapshot {
    pub step: u64,
    pub neighbor_counts: Vec<u32>,
    pub loads: Vec<u32>,
}

/// Fraction of scene objects with at least one annotation by `step`,
/// recomputed from the observation log.
pub fn observation_coverage(run: &RunOutput, step: u64) -> f64 {
    let seen: BTreeSet<u32> = run
        .observations
        .iter()
        .filter(|o| o.step <= step)
        .map(|o| o.object)
        .collect();
    seen.len() as f64 / run.scene.len() as f64
}

/// Fraction of scene objects with a live consolidated annotation at `step`,
/// recomputed from tuple lifecycles.
pub fn consolidation_coverage(run: &RunOutput, step: u64) -> f64 {
    let covered: BTreeSet<u32> = run
        .tuples
        .iter()
        .filter(|t| t.consolidated && t.live_at(step))
        .filter_map(|t| t.object)
        .collect();
    covered.len() as f64 / run.scene.len() as f64
}

/// Fraction of live consolidated annotations matching ground truth at
/// `step`; `None` while there are none.
pub fn map_accuracy(run: &RunOutput, step: u64) -> Option<f64> {
    let truth: BTreeMap<u32, ClassId> = run.scene.iter().map(|o| (o.id, o.class)).collect();
    let mut total = 0u32;
    let mut correct = 0u32;
    for t in run.tuples.iter().filter(|t| t.consolidated && t.live_at(step)) {
        if let Some(obj) = t.object {
            total += 1;
            if truth.get(&obj) == Some(&t.class) {
                correct += 1;
            }
        }
    }
    (total > 0).then(|| correct as f64 / total as f64)
}

/// Mean outbound bytes per second for each agent over the whole run.
pub fn bandwidth_per_agent(run: &RunOutput) -> Vec<f64> {
    let steps = run.per_agent_bytes.len();
    if steps == 0 {
        return vec![0.0; run.config.n_agents as usize];
    }
    let duration_s = steps as f64 * run.config.dt;
    let mut totals = vec![0u64; run.config.n_agents as usize];
    for row in &run.per_agent_bytes {
        for (agent, &bytes) in row.iter().enumerate() {
            totals[agent] += bytes as u64;
        }
    }
    totals.iter().map(|&b| b as f64 / duration_s).collect()
}

/// Mean bytes per second per agent at each step (the bandwidth series).
pub fn bandwidth_series(run: &RunOutput) -> Vec<f64> {
    let n = run.config.n_agents as f64;
    run.per_agent_bytes
        .iter()
        .map(|row| row.iter().map(|&b| b as u64).sum::<u64>() as f64 / n / run.config.dt)
        .collect()
}

/// Empirical NodeID and tuple-hash distributions over the run.
pub fn nodeid_hash_histograms(run: &RunOutput) -> (&BTreeMap<u32, u64>, &BTreeMap<u16, u64>) {
    (&run.nodeid_histogram, &run.hash_histogram)
}
