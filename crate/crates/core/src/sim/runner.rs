//! Lock-step experiment driver: agents read last round's messages, act,
//! then publish — with global conservation, capacity, and acceptance audits
//! between rounds.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::binpack::{self, BinpackError};
use crate::classes::ModelError;
use crate::env::{
    generate_scene, load_scene, neighbor_graph, AgentPose, Arena, ConfigError, SceneError,
    SceneObject, SimConfig,
};
use crate::mesh::{
    exchange, AgentId, HashStaircase, MeshError, MeshMessage, NodeConfig, NodeState, Request,
};

use super::agent::{Agent, StepOutput};
use super::metrics::{
    ConsolidationEvent, MetricsFrame, ObservationEvent, PackingSnapshot, TupleRecord,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Binpack(#[from] BinpackError),
    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: u64, what: String },
}

/// Soft protocol outcomes, counted rather than fatal.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AuditSummary {
    /// Store requests discarded under queue pressure (tuple loss).
    pub tuple_losses: u64,
    /// TTL-fallback acceptances.
    pub forced_stores: u64,
    pub replies_dropped: u64,
    pub floods_dropped: u64,
}

/// Everything a run produces, in memory; the writers in
/// [`super::output`] render it to files.
#[derive(Debug)]
pub struct RunOutput {
    pub config: SimConfig,
    pub seed: u64,
    pub steps: u64,
    pub scene: Vec<SceneObject>,
    pub frames: Vec<MetricsFrame>,
    pub observations: Vec<ObservationEvent>,
    pub consolidations: Vec<ConsolidationEvent>,
    /// Lifecycle of every tuple ever created, sorted by id.
    pub tuples: Vec<TupleRecord>,
    pub packing: Vec<PackingSnapshot>,
    pub nodeid_histogram: BTreeMap<u32, u64>,
    pub hash_histogram: BTreeMap<u16, u64>,
    /// Outbound bytes, indexed `[step][agent]`.
    pub per_agent_bytes: Vec<Vec<u32>>,
    /// Mesh debug dump at the final step, one line per stored tuple.
    pub final_dump: Vec<String>,
    pub audit: AuditSummary,
    /// Independent per-node byte counters, for cross-checking the frames.
    pub bytes_sent_by_node_stats: u64,
}

impl RunOutput {
    /// Consolidated entry (class, votes) per object in the final store,
    /// lowest tuple id winning if several are still converging.
    pub fn final_map(&self) -> BTreeMap<u32, (crate::classes::ClassId, u32)> {
        let votes_by_tuple: BTreeMap<_, _> = self
            .consolidations
            .iter()
            .map(|c| (c.tuple, c.votes))
            .collect();
        let mut map = BTreeMap::new();
        for t in &self.tuples {
            if t.consolidated && t.erased_step.is_none() {
                if let (Some(obj), Some(&votes)) = (t.object, votes_by_tuple.get(&t.id)) {
                    map.entry(obj).or_insert((t.class, votes));
                }
            }
        }
        map
    }
}

/// Runs one deterministic experiment: identical config and seed give a
/// bit-identical [`RunOutput`].
pub fn run_experiment(cfg: &SimConfig, seed: u64, steps: u64) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let model = cfg.class_model()?;
    let staircase = HashStaircase::new(&model, cfg.hash_step)?;
    let arena = Arena { size: cfg.arena_size };
    let frustum = cfg.frustum();
    let n = cfg.n_agents as usize;
    let audit_capacity = cfg.memory_capacity();

    let mut world_rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = match &cfg.scene_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(SceneError::Io)?;
            load_scene(&text)?
        }
        None => generate_scene(cfg.scene_objects as usize, arena, &model, &mut world_rng)?,
    };
    for o in &scene {
        model.accuracy(o.class)?;
        if !arena.contains(o.center[0], o.center[1]) {
            return Err(SimError::Invariant {
                step: 0,
                what: format!("scene object {} lies outside the arena", o.id),
            });
        }
    }
    let mut center_to_object: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for o in &scene {
        let key = ((o.center[0] as f32).to_bits(), (o.center[1] as f32).to_bits());
        if center_to_object.insert(key, o.id).is_some() {
            return Err(SimError::Invariant {
                step: 0,
                what: "two scene objects share a planar center".into(),
            });
        }
    }

    let node_cfg = NodeConfig {
        storage_capacity: cfg.storage_capacity,
        routing_capacity: cfg.routing_capacity,
        store_ttl: cfg.store_ttl,
        reply_ttl: cfg.store_ttl,
        seen_horizon: cfg.seen_horizon,
        location_epsilon: 1e-6,
        bandwidth_cap: cfg.bandwidth_cap as usize,
    };

    let mut agents: Vec<Agent> = Vec::with_capacity(n);
    for i in 0..n {
        let pose = spawn_pose(arena, &scene, &agents, &mut world_rng, i)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + i as u64);
        agents.push(Agent::new(
            pose,
            NodeState::new(AgentId(i as u16), node_cfg.clone()),
            rng,
        ));
    }

    let mut inboxes: BTreeMap<AgentId, Vec<MeshMessage>> = BTreeMap::new();
    let mut ledger: BTreeMap<crate::mesh::TupleId, TupleRecord> = BTreeMap::new();
    let mut observed_objects: BTreeSet<u32> = BTreeSet::new();
    let mut observations = Vec::new();
    let mut consolidations = Vec::new();
    let mut frames = Vec::with_capacity(steps as usize);
    let mut packing = Vec::with_capacity(steps as usize);
    let mut nodeid_histogram: BTreeMap<u32, u64> = BTreeMap::new();
    let mut hash_histogram: BTreeMap<u16, u64> = BTreeMap::new();
    let mut per_agent_bytes = Vec::with_capacity(steps as usize);
    let mut audit = AuditSummary::default();

    for step in 0..steps {
        let positions: Vec<[f64; 2]> = agents.iter().map(|a| [a.pose.x, a.pose.y]).collect();

        let mut outboxes: BTreeMap<AgentId, MeshMessage> = BTreeMap::new();
        for i in 0..n {
            let inbox = inboxes.remove(&AgentId(i as u16)).unwrap_or_default();
            let others: Vec<[f64; 2]> = positions
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &p)| p)
                .collect();
            let mut out = StepOutput::default();
            let msg = agents[i].control_step(
                step, inbox, arena, &scene, &others, &frustum, &model, &staircase, cfg, &mut out,
            );

            for (key, value) in &out.created {
                let center_key = (value.center[0].to_bits(), value.center[1].to_bits());
                hash_histogram
                    .entry(key.hash)
                    .and_modify(|c| *c += 1)
                    .or_insert(1);
                ledger.insert(
                    key.id,
                    TupleRecord {
                        id: key.id,
                        class: value.class,
                        consolidated: value.consolidated,
                        object: center_to_object.get(&center_key).copied(),
                        created_step: step,
                        erased_step: None,
                    },
                );
            }
            if let Some((object, label)) = out.observation {
                observed_objects.insert(object);
                observations.push(ObservationEvent {
                    step,
                    agent: i as u16,
                    object,
                    label,
                });
            }
            for ((x, y), label, votes, key) in out.consolidations {
                if votes < cfg.min_votes {
                    return Err(SimError::Invariant {
                        step,
                        what: format!("consolidation from {votes} votes, floor {}", cfg.min_votes),
                    });
                }
                let center_key = ((x).to_bits(), (y).to_bits());
                consolidations.push(ConsolidationEvent {
                    step,
                    agent: i as u16,
                    object: center_to_object.get(&center_key).copied(),
                    label,
                    votes,
                    tuple: key.id,
                });
            }
            outboxes.insert(AgentId(i as u16), msg);
        }

        // exchange over the post-move topology
        let new_positions: Vec<[f64; 2]> = agents.iter().map(|a| [a.pose.x, a.pose.y]).collect();
        let adjacency = neighbor_graph(&new_positions, cfg.comm_range);
        let neighbor_map: BTreeMap<AgentId, BTreeSet<AgentId>> = adjacency
            .iter()
            .enumerate()
            .map(|(i, peers)| {
                (
                    AgentId(i as u16),
                    peers.iter().map(|&j| AgentId(j as u16)).collect(),
                )
            })
            .collect();
        let (next_inboxes, store_bounces, reply_bounces) = exchange(&outboxes, &neighbor_map);
        for (sender, key, value, age) in store_bounces {
            agents[sender.0 as usize].node.bounce_store(key, value, age);
        }
        for (sender, reply) in reply_bounces {
            agents[sender.0 as usize].node.bounce_reply(reply);
        }
        inboxes = next_inboxes;

        // drain per-node events into the lifecycle ledger
        for agent in &mut agents {
            let events = std::mem::take(&mut agent.node.events);
            for id in events.erased {
                if let Some(rec) = ledger.get_mut(&id) {
                    rec.erased_step = Some(step);
                }
            }
            for id in events.dropped_tuples {
                audit.tuple_losses += 1;
                if let Some(rec) = ledger.get_mut(&id) {
                    rec.erased_step = Some(step);
                }
            }
        }

        audit_step(step, &agents, &inboxes, &ledger, &node_cfg)?;

        // metrics
        let loads: Vec<u32> = agents.iter().map(|a| a.node.stored_count()).collect();
        let neighbor_counts: Vec<u32> = adjacency.iter().map(|p| p.len() as u32).collect();
        let total_stored: u32 = loads.iter().sum();
        let realized = binpack::realized_cost(&loads, &neighbor_counts, audit_capacity)?;
        let optimal = binpack::optimal_cost(total_stored, &neighbor_counts, audit_capacity)?;
        let worst = binpack::worst_cost(total_stored, &neighbor_counts, audit_capacity)?;
        let worst_exact =
            binpack::worst_cost_exact(total_stored, &neighbor_counts, audit_capacity)?;

        let bytes_row: Vec<u32> = (0..n)
            .map(|i| outboxes[&AgentId(i as u16)].wire_size() as u32)
            .collect();
        let bytes_sent_total: u64 = bytes_row.iter().map(|&b| b as u64).sum();

        for agent in &agents {
            let delta = agent.node.current_node_id();
            nodeid_histogram
                .entry(delta)
                .and_modify(|c| *c += 1)
                .or_insert(1);
        }

        let live_consolidated: Vec<&TupleRecord> = ledger
            .values()
            .filter(|t| t.consolidated && t.erased_step.is_none())
            .collect();
        let covered: BTreeSet<u32> =
            live_consolidated.iter().filter_map(|t| t.object).collect();
        let (mut correct, mut total) = (0u32, 0u32);
        for t in &live_consolidated {
            if let Some(obj) = t.object {
                total += 1;
                if scene[obj as usize].class == t.class {
                    correct += 1;
                }
            }
        }

        frames.push(MetricsFrame {
            step,
            observed_coverage: observed_objects.len() as f64 / scene.len() as f64,
            consolidation_coverage: covered.len() as f64 / scene.len() as f64,
            map_accuracy: (total > 0).then(|| correct as f64 / total as f64),
            bytes_sent_total,
            realized_cost: realized,
            optimal_cost: optimal,
            worst_cost: worst,
            worst_cost_exact: worst_exact,
        });
        packing.push(PackingSnapshot {
            step,
            neighbor_counts,
            loads,
        });
        per_agent_bytes.push(bytes_row);
    }

    for agent in &agents {
        audit.forced_stores += agent.node.stats.forced_stores;
        audit.replies_dropped += agent.node.stats.replies_dropped;
        audit.floods_dropped += agent.node.stats.floods_dropped;
    }
    let bytes_sent_by_node_stats = agents.iter().map(|a| a.node.stats.bytes_sent).sum();
    let final_dump = agents.iter().flat_map(|a| a.node.dump_lines()).collect();

    Ok(RunOutput {
        config: cfg.clone(),
        seed,
        steps,
        scene,
        frames,
        observations,
        consolidations,
        tuples: ledger.into_values().collect(),
        packing,
        nodeid_histogram,
        hash_histogram,
        per_agent_bytes,
        final_dump,
        audit,
        bytes_sent_by_node_stats,
    })
}

fn spawn_pose(
    arena: Arena,
    scene: &[SceneObject],
    placed: &[Agent],
    rng: &mut impl Rng,
    index: usize,
) -> Result<AgentPose, SimError> {
    let margin = 0.1;
    for _ in 0..5000 {
        let x = rng.gen_range(margin..arena.size - margin);
        let y = rng.gen_range(margin..arena.size - margin);
        let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let in_box = scene.iter().any(|o| o.footprint_contains(x, y, 0.05));
        let crowded = placed.iter().any(|a| {
            let dx = a.pose.x - x;
            let dy = a.pose.y - y;
            dx * dx + dy * dy < 0.04
        });
        if !in_box && !crowded {
            return Ok(AgentPose { x, y, heading });
        }
    }
    Err(SimError::Invariant {
        step: 0,
        what: format!("could not find a free spawn position for agent {index}"),
    })
}

/// Global audits: every live tuple held or in flight exactly once, no
/// capacity breach, NodeID rule respected at acceptance time.
fn audit_step(
    step: u64,
    agents: &[Agent],
    pending_inboxes: &BTreeMap<AgentId, Vec<MeshMessage>>,
    ledger: &BTreeMap<crate::mesh::TupleId, TupleRecord>,
    node_cfg: &NodeConfig,
) -> Result<(), SimError> {
    let fail = |what: String| Err(SimError::Invariant { step, what });

    let mut holdings: BTreeMap<crate::mesh::TupleId, u32> = BTreeMap::new();
    for agent in agents {
        if agent.node.stored_count() > node_cfg.storage_capacity {
            return fail(format!(
                "agent {} stores {} tuples over capacity {}",
                agent.node.id(),
                agent.node.stored_count(),
                node_cfg.storage_capacity
            ));
        }
        if agent.node.queue_len() > node_cfg.routing_capacity as usize {
            return fail(format!(
                "agent {} queues {} items over capacity {}",
                agent.node.id(),
                agent.node.queue_len(),
                node_cfg.routing_capacity
            ));
        }
        if !agent.node.acceptance_audit_ok() {
            return fail(format!(
                "agent {} holds a tuple accepted with NodeID <= hash",
                agent.node.id()
            ));
        }
        for (key, _) in agent.node.stored_tuples() {
            *holdings.entry(key.id).or_insert(0) += 1;
        }
        for id in agent.node.queued_store_ids() {
            *holdings.entry(id).or_insert(0) += 1;
        }
    }
    for (&owner, msgs) in pending_inboxes {
        for msg in msgs {
            for req in &msg.requests {
                if let Request::Store { recipient, key, .. } = req {
                    if *recipient == owner {
                        *holdings.entry(key.id).or_insert(0) += 1;
                    }
                }
            }
        }
    }

    for record in ledger.values() {
        let live = record.erased_step.is_none();
        let held = holdings.get(&record.id).copied().unwrap_or(0);
        if live && held != 1 {
            return fail(format!(
                "tuple {} is live but held {held} times",
                record.id
            ));
        }
        if !live && held != 0 {
            return fail(format!(
                "tuple {} was erased but is still held {held} times",
                record.id
            ));
        }
    }
    for id in holdings.keys() {
        if !ledger.contains_key(id) {
            return fail(format!("unledgered tuple {id} is in the system"));
        }
    }
    Ok(())
}
