//! One agent: pose, mesh node, query ledger, and the per-step control loop
//! that ties sensing, storage, querying, voting, and routing together.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::classes::{ClassId, ClassModel};
use crate::ensemble::plurality_vote;
use crate::env::{
    classifier_sample, diffusion_step, frustum_detect, AgentPose, Arena, FrustumSpec,
    MotionParams, SceneObject, SimConfig,
};
use crate::mesh::{HashStaircase, MeshMessage, NodeState, QueryId, TupleKey, TupleValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryState {
    Pending,
    Expired,
    Consolidated,
}

/// Bookkeeping for one started query.
#[derive(Debug, Clone)]
pub struct QueryLedgerEntry {
    pub target: (f32, f32),
    pub start_step: u64,
    /// Collected replies, deduplicated by tuple id.
    pub replies: BTreeMap<crate::mesh::TupleId, (TupleKey, TupleValue)>,
    pub state: QueryState,
}

/// What one control step tells the driver.
#[derive(Debug, Default)]
pub struct StepOutput {
    /// Tuples this agent created this step (observation or consolidation).
    pub created: Vec<(TupleKey, TupleValue)>,
    /// `(object, label)` when an annotation was recorded.
    pub observation: Option<(u32, ClassId)>,
    /// `(location, label, votes, new tuple)` for each consolidation.
    pub consolidations: Vec<((f32, f32), ClassId, u32, TupleKey)>,
}

#[derive(Debug)]
pub struct Agent {
    pub pose: AgentPose,
    pub node: NodeState,
    rng: ChaCha8Rng,
    recording_cooldown: u32,
    querying_cooldown: u32,
    ledger: BTreeMap<QueryId, QueryLedgerEntry>,
}

impl Agent {
    pub fn new(pose: AgentPose, node: NodeState, rng: ChaCha8Rng) -> Self {
        Agent {
            pose,
            node,
            rng,
            recording_cooldown: 0,
            querying_cooldown: 0,
            ledger: BTreeMap::new(),
        }
    }

    pub fn pending_queries(&self) -> usize {
        self.ledger.len()
    }

    /// One iteration of the control loop: receive, move, sense and store,
    /// trigger queries, evaluate finished queries (vote, store consolidated,
    /// erase the rest), then route and serialize. Returns the broadcast for
    /// this step.
    #[allow(clippy::too_many_arguments)]
    pub fn control_step(
        &mut self,
        step: u64,
        inbox: Vec<MeshMessage>,
        arena: Arena,
        objects: &[SceneObject],
        others: &[[f64; 2]],
        frustum: &FrustumSpec,
        model: &ClassModel,
        staircase: &HashStaircase,
        cfg: &SimConfig,
        out: &mut StepOutput,
    ) -> MeshMessage {
        // receive and deserialize
        self.node.begin_step();
        for msg in inbox {
            self.node.receive(msg);
        }
        self.node.process_inbox();
        for delivery in self.node.take_deliveries() {
            if let Some(entry) = self.ledger.get_mut(&delivery.query) {
                if entry.state == QueryState::Pending {
                    entry
                        .replies
                        .entry(delivery.key.id)
                        .or_insert((delivery.key, delivery.value));
                }
            }
        }

        // diffusion motion
        let motion = MotionParams {
            speed: cfg.speed,
            dt: cfg.dt,
            avoid_radius: cfg.avoid_radius,
            jitter: cfg.heading_jitter,
        };
        self.pose = diffusion_step(&self.pose, arena, objects, others, &motion, &mut self.rng);

        // sense and write an annotation
        if self.recording_cooldown == 0 && self.node.queue_has_room(1) {
            if let Some(object) = frustum_detect(&self.pose, frustum, objects) {
                let label = classifier_sample(object.class, model, &mut self.rng)
                    .expect("scene classes come from the model");
                let hash = staircase
                    .bucket(label, false)
                    .expect("classifier labels come from the model");
                let fr = object.front_right_vector();
                let value = TupleValue {
                    class: label,
                    consolidated: false,
                    center: object.center.map(|c| c as f32),
                    yaw: object.yaw as f32,
                    front_right: fr.map(|c| c as f32),
                };
                let key = self.node.local_store(hash, value.clone());
                out.created.push((key, value));
                out.observation = Some((object.id, label));
                self.recording_cooldown = cfg.recording_timeout;
            }
        }

        // a location held twice locally means votes are waiting out there
        if self.querying_cooldown == 0 && self.node.queue_has_room(1) {
            if let Some((x, y)) = self.duplicate_location() {
                let (query, own) = self.node.local_get(x, y, 0.0);
                let mut entry = QueryLedgerEntry {
                    target: (x, y),
                    start_step: step,
                    replies: BTreeMap::new(),
                    state: QueryState::Pending,
                };
                for (key, value) in own {
                    entry.replies.insert(key.id, (key, value));
                }
                self.ledger.insert(query, entry);
                self.querying_cooldown = cfg.querying_timeout;
            }
        }

        self.evaluate_queries(step, staircase, cfg, out);

        if self.recording_cooldown > 0 {
            self.recording_cooldown -= 1;
        }
        if self.querying_cooldown > 0 {
            self.querying_cooldown -= 1;
        }

        self.node.finish_step()
    }

    /// First location (in tuple-id order) held more than once in this
    /// agent's memory (stored or in flight) and not already under a pending
    /// query.
    fn duplicate_location(&self) -> Option<(f32, f32)> {
        let mut counts: BTreeMap<(u32, u32), (f32, f32, u32)> = BTreeMap::new();
        for (_, value) in self.node.local_tuples() {
            let bits = (value.center[0].to_bits(), value.center[1].to_bits());
            let slot = counts
                .entry(bits)
                .or_insert((value.center[0], value.center[1], 0));
            slot.2 += 1;
        }
        counts.values().find_map(|&(x, y, n)| {
            let queried = self
                .ledger
                .values()
                .any(|e| e.state == QueryState::Pending && e.target == (x, y));
            (n >= 2 && !queried).then_some((x, y))
        })
    }

    /// Queries past the reply-wait threshold either consolidate (enough
    /// votes), defer to an existing consolidated annotation, or expire.
    fn evaluate_queries(
        &mut self,
        step: u64,
        staircase: &HashStaircase,
        cfg: &SimConfig,
        out: &mut StepOutput,
    ) {
        let due: Vec<QueryId> = self
            .ledger
            .iter()
            .filter(|(_, e)| {
                e.state == QueryState::Pending && step - e.start_step >= cfg.reply_wait as u64
            })
            .map(|(&q, _)| q)
            .collect();

        for query in due {
            let entry = self.ledger.get_mut(&query).expect("listed above");
            let (x, y) = entry.target;

            // someone already consolidated this location: keep their result,
            // clear any stragglers
            let existing = entry
                .replies
                .values()
                .filter(|(_, v)| v.consolidated)
                .map(|(k, _)| k.id)
                .min();
            if let Some(winner) = existing {
                if !self.node.queue_has_room(1) {
                    continue; // retry next step
                }
                entry.state = QueryState::Expired;
                self.node.local_erase(x, y, 0.0, vec![winner]);
                continue;
            }

            let votes = entry.replies.len() as u32;
            if votes >= cfg.min_votes {
                if !self.node.queue_has_room(2) {
                    continue; // store + erase need two slots; retry
                }
                let labels: Vec<ClassId> =
                    entry.replies.values().map(|(_, v)| v.class).collect();
                let winner = plurality_vote(&labels, &mut self.rng).expect("votes >= 1");
                let geometry = entry
                    .replies
                    .values()
                    .next()
                    .map(|(_, v)| v.clone())
                    .expect("votes >= 1");
                let value = TupleValue {
                    class: winner,
                    consolidated: true,
                    ..geometry
                };
                let hash = staircase
                    .bucket(winner, true)
                    .expect("vote labels come from the model");
                entry.state = QueryState::Consolidated;
                let key = self.node.local_store(hash, value.clone());
                self.node.local_erase(x, y, 0.0, vec![key.id]);
                out.created.push((key, value));
                out.consolidations.push(((x, y), winner, votes, key));
            } else {
                // not enough votes: forget the replies, re-arm later
                entry.state = QueryState::Expired;
            }
        }
        self.ledger.retain(|_, e| e.state == QueryState::Pending);
    }
}
