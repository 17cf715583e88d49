//! Per-agent mesh participation: bounded storage, a bounded routing queue,
//! and the store/get/erase protocol over one broadcast per step.
//!
//! Protocol summary. Store requests are point-to-point and greedily chase
//! the highest-NodeID neighbor until an agent with NodeID above the tuple
//! hash (and free storage) absorbs them; a request still homeless after
//! `store_ttl` steps is stored by its current holder, evicting that
//! holder's lowest-hash tuple back into a fresh store request if needed.
//! Get and erase flood with per-query duplicate suppression; replies walk
//! the recorded reverse path hop by hop. Nothing here knows about time or
//! the world: the driver feeds inboxes and collects one outbox per step.

use std::collections::{BTreeMap, BTreeSet};

use super::tuple::{node_id, AgentId, TupleId, TupleKey, TupleValue};
use super::wire::{MeshMessage, QueryId, Reply, Request, HEADER_WIRE_SIZE};

#[derive(Debug, Clone)]
pub struct NodeConfig {
    /// Tuples the agent may hold (S_i).
    pub storage_capacity: u32,
    /// Queued requests/replies the agent may hold (R_i).
    pub routing_capacity: u32,
    /// Steps a store request may wander before its holder keeps it.
    pub store_ttl: u32,
    /// Steps a reply waits for its next hop to reappear before being dropped.
    pub reply_ttl: u32,
    /// Steps after which a query-id record may be forgotten.
    pub seen_horizon: u32,
    /// Radius-zero queries match box centers within this distance.
    pub location_epsilon: f32,
    /// Outbound bytes per step, including the 8-byte header.
    pub bandwidth_cap: usize,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            storage_capacity: 10,
            routing_capacity: 10,
            store_ttl: 50,
            reply_ttl: 50,
            seen_horizon: 200,
            location_epsilon: 1e-6,
            bandwidth_cap: 256,
        }
    }
}

#[derive(Debug, Clone)]
struct StoredTuple {
    key: TupleKey,
    value: TupleValue,
    /// NodeID at acceptance time, for the acceptance audit.
    accepted_node_id: u32,
    /// True when stored by TTL fallback rather than the NodeID rule.
    forced: bool,
}

#[derive(Debug, Clone)]
enum Queued {
    Store { key: TupleKey, value: TupleValue, age: u32 },
    Get { query: QueryId, x: f32, y: f32, radius: f32 },
    Erase { query: QueryId, x: f32, y: f32, radius: f32, keep: Vec<TupleId> },
    Reply { reply: Reply, age: u32 },
}

#[derive(Debug, Clone, Copy)]
struct SeenRecord {
    predecessor: AgentId,
    age: u32,
}

/// A query result that reached its originator.
#[derive(Debug, Clone)]
pub struct QueryDelivery {
    pub query: QueryId,
    pub key: TupleKey,
    pub value: TupleValue,
}

/// What happened on this node during one step, drained by the driver for
/// audits and metrics.
#[derive(Debug, Default, Clone)]
pub struct StepEvents {
    /// (tuple, NodeID at acceptance, hash, forced) for every acceptance.
    pub stored: Vec<(TupleId, u32, u16, bool)>,
    /// Tuples removed by erase requests.
    pub erased: Vec<TupleId>,
    /// Tuples evicted back into the mesh by the TTL fallback.
    pub evicted: Vec<TupleId>,
    /// Store requests discarded under queue pressure: tuple loss.
    pub dropped_tuples: Vec<TupleId>,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct NodeStats {
    pub bytes_sent: u64,
    pub replies_dropped: u64,
    pub floods_dropped: u64,
    pub forced_stores: u64,
}

#[derive(Debug)]
pub struct NodeState {
    id: AgentId,
    cfg: NodeConfig,
    stored: BTreeMap<TupleId, StoredTuple>,
    queue: Vec<Queued>,
    seen: BTreeMap<QueryId, SeenRecord>,
    heard: BTreeMap<AgentId, u32>,
    inbox: Vec<MeshMessage>,
    tuple_seq: u16,
    query_seq: u16,
    deliveries: Vec<QueryDelivery>,
    pub events: StepEvents,
    pub stats: NodeStats,
}

impl NodeState {
    pub fn new(id: AgentId, cfg: NodeConfig) -> Self {
        NodeState {
            id,
            cfg,
            stored: BTreeMap::new(),
            queue: Vec::new(),
            seen: BTreeMap::new(),
            heard: BTreeMap::new(),
            inbox: Vec::new(),
            tuple_seq: 0,
            query_seq: 0,
            deliveries: Vec::new(),
            events: StepEvents::default(),
            stats: NodeStats::default(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn stored_count(&self) -> u32 {
        self.stored.len() as u32
    }

    /// Free storage slots; storing requires one regardless of NodeID.
    pub fn available_memory(&self) -> u32 {
        self.cfg.storage_capacity - self.stored_count()
    }

    /// Free memory across both pools (storage and routing), the `m` that
    /// feeds the NodeID: willingness reflects total headroom.
    pub fn free_total_memory(&self) -> u32 {
        (self.cfg.storage_capacity + self.cfg.routing_capacity)
            .saturating_sub(self.stored_count() + self.queue.len() as u32)
    }

    /// Neighbors heard from this step.
    pub fn neighbor_count(&self) -> u32 {
        self.heard.len() as u32
    }

    pub fn current_node_id(&self) -> u32 {
        node_id(self.free_total_memory(), self.neighbor_count())
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queue_has_room(&self, extra: usize) -> bool {
        self.queue.len() + extra <= self.cfg.routing_capacity as usize
    }

    pub fn stored_tuples(&self) -> impl Iterator<Item = (&TupleKey, &TupleValue)> {
        self.stored.values().map(|t| (&t.key, &t.value))
    }

    /// Every tuple in this agent's memory: settled in storage or riding the
    /// routing queue.
    pub fn local_tuples(&self) -> impl Iterator<Item = (&TupleKey, &TupleValue)> {
        self.stored_tuples().chain(self.queue.iter().filter_map(|q| match q {
            Queued::Store { key, value, .. } => Some((key, value)),
            _ => None,
        }))
    }

    /// Tuple ids currently in flight through this node's queue.
    pub fn queued_store_ids(&self) -> Vec<TupleId> {
        self.queue
            .iter()
            .filter_map(|q| match q {
                Queued::Store { key, .. } => Some(key.id),
                _ => None,
            })
            .collect()
    }

    /// True when every stored tuple satisfied NodeID > hash at acceptance
    /// (TTL-forced acceptances are exempt by design).
    pub fn acceptance_audit_ok(&self) -> bool {
        self.stored
            .values()
            .all(|t| t.forced || t.accepted_node_id > t.key.hash as u32)
    }

    /// One `agent tuple hash class x y consolidated` line per stored tuple.
    pub fn dump_lines(&self) -> Vec<String> {
        self.stored
            .values()
            .map(|t| {
                format!(
                    "{} {} {} {} {} {} {}",
                    self.id,
                    t.key.id,
                    t.key.hash,
                    t.value.class,
                    t.value.center[0],
                    t.value.center[1],
                    t.value.consolidated as u8
                )
            })
            .collect()
    }

    // ---- per-step lifecycle -------------------------------------------

    pub fn begin_step(&mut self) {
        self.heard.clear();
        self.events = StepEvents::default();
        let horizon = self.cfg.seen_horizon;
        self.seen.retain(|_, rec| {
            rec.age += 1;
            rec.age <= horizon
        });
    }

    /// Buffers one received broadcast. Call once per neighbor message,
    /// then [`NodeState::process_inbox`].
    pub fn receive(&mut self, msg: MeshMessage) {
        self.heard.insert(msg.sender, msg.node_id);
        self.inbox.push(msg);
    }

    pub fn process_inbox(&mut self) {
        let mut inbox = std::mem::take(&mut self.inbox);
        inbox.sort_by_key(|m| m.sender);
        for msg in inbox {
            for req in msg.requests {
                match req {
                    Request::Store { recipient, age, key, value } => {
                        if recipient == self.id {
                            self.admit_store(key, value, age);
                        }
                    }
                    Request::Get { query, x, y, radius } => {
                        if self.first_sight(query, msg.sender) {
                            for (key, value) in self.matches(x, y, radius) {
                                self.queue.push(Queued::Reply {
                                    reply: Reply { query, next_hop: msg.sender, key, value },
                                    age: 0,
                                });
                            }
                            self.queue.push(Queued::Get { query, x, y, radius });
                        }
                    }
                    Request::Erase { query, x, y, radius, keep } => {
                        if self.first_sight(query, msg.sender) {
                            self.erase_matching(x, y, radius, &keep);
                            self.queue.push(Queued::Erase { query, x, y, radius, keep });
                        }
                    }
                }
            }
            for reply in msg.replies {
                if reply.next_hop != self.id {
                    continue;
                }
                if reply.query.originator() == self.id {
                    self.deliveries.push(QueryDelivery {
                        query: reply.query,
                        key: reply.key,
                        value: reply.value,
                    });
                } else if let Some(rec) = self.seen.get(&reply.query) {
                    self.queue.push(Queued::Reply {
                        reply: Reply { next_hop: rec.predecessor, ..reply },
                        age: 0,
                    });
                } else {
                    self.stats.replies_dropped += 1;
                }
            }
        }
        self.enforce_queue_bound();
    }

    pub fn take_deliveries(&mut self) -> Vec<QueryDelivery> {
        std::mem::take(&mut self.deliveries)
    }

    // ---- the three data-structure operations --------------------------

    /// Creates a tuple under a fresh key and offers it to the mesh. The
    /// creator keeps it when its own NodeID beats the hash; otherwise the
    /// request starts hunting through the routing queue.
    pub fn local_store(&mut self, hash: u16, value: TupleValue) -> TupleKey {
        let key = TupleKey {
            id: TupleId::new(self.id, self.tuple_seq),
            hash,
        };
        self.tuple_seq = self.tuple_seq.wrapping_add(1);
        self.admit_store(key, value, 0);
        key
    }

    /// Starts a location query. Own matches are returned immediately; the
    /// flood brings everyone else's.
    pub fn local_get(&mut self, x: f32, y: f32, radius: f32) -> (QueryId, Vec<(TupleKey, TupleValue)>) {
        let query = QueryId::new(self.id, self.query_seq);
        self.query_seq = self.query_seq.wrapping_add(1);
        self.seen.insert(query, SeenRecord { predecessor: self.id, age: 0 });
        let own = self.matches(x, y, radius);
        self.queue.push(Queued::Get { query, x, y, radius });
        (query, own)
    }

    /// Erases every matching tuple not listed in `keep`, here and (by
    /// flooding) everywhere else.
    pub fn local_erase(&mut self, x: f32, y: f32, radius: f32, keep: Vec<TupleId>) -> QueryId {
        let query = QueryId::new(self.id, self.query_seq);
        self.query_seq = self.query_seq.wrapping_add(1);
        self.seen.insert(query, SeenRecord { predecessor: self.id, age: 0 });
        self.erase_matching(x, y, radius, &keep);
        self.queue.push(Queued::Erase { query, x, y, radius, keep });
        query
    }

    // ---- routing -------------------------------------------------------

    /// Ages and resolves queued work, then assembles this step's broadcast
    /// within the bandwidth cap. Deferred entries stay queued.
    pub fn finish_step(&mut self) -> MeshMessage {
        for item in &mut self.queue {
            match item {
                Queued::Store { age, .. } => *age += 1,
                Queued::Reply { age, .. } => *age += 1,
                _ => {}
            }
        }
        self.absorb_eligible_stores();
        self.resolve_ttl_stores();
        self.drop_expired_replies();

        let delta = self.current_node_id();
        // homeless tuples keep moving toward the highest-NodeID neighbor
        // until someone's NodeID clears their hash (or the TTL settles them)
        let store_target = self
            .heard
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(&id, _)| id);

        // serialization order: replies, erases, stores, gets; ties by id
        let mut order: Vec<usize> = (0..self.queue.len()).collect();
        order.sort_by_key(|&i| match &self.queue[i] {
            Queued::Reply { reply, .. } => (0u8, reply.query.raw(), reply.key.id.raw()),
            Queued::Erase { query, .. } => (1, query.raw(), 0),
            Queued::Store { key, .. } => (2, key.id.raw(), 0),
            Queued::Get { query, .. } => (3, query.raw(), 0),
        });

        let mut budget = self.cfg.bandwidth_cap.saturating_sub(HEADER_WIRE_SIZE);
        let mut picked: Vec<usize> = Vec::new();
        let mut requests = Vec::new();
        let mut replies = Vec::new();
        for &i in &order {
            if requests.len() + replies.len() >= 255 {
                break;
            }
            let entry = match &self.queue[i] {
                Queued::Reply { reply, .. } => {
                    if !self.heard.contains_key(&reply.next_hop) {
                        continue; // hold until the hop reappears
                    }
                    Err(reply.clone())
                }
                Queued::Erase { query, x, y, radius, keep } => Ok(Request::Erase {
                    query: *query,
                    x: *x,
                    y: *y,
                    radius: *radius,
                    keep: keep.clone(),
                }),
                Queued::Store { key, value, age } => match store_target {
                    Some(recipient) => Ok(Request::Store {
                        recipient,
                        age: (*age).min(u8::MAX as u32) as u8,
                        key: *key,
                        value: value.clone(),
                    }),
                    None => continue, // isolated: keep hunting later
                },
                Queued::Get { query, x, y, radius } => Ok(Request::Get {
                    query: *query,
                    x: *x,
                    y: *y,
                    radius: *radius,
                }),
            };
            let size = match &entry {
                Ok(req) => req.wire_size(),
                Err(_) => super::wire::REPLY_WIRE_SIZE,
            };
            if size > budget {
                continue; // deferred to a later step
            }
            budget -= size;
            picked.push(i);
            match entry {
                Ok(req) => requests.push(req),
                Err(reply) => replies.push(reply),
            }
        }

        // drop sent items from the queue, highest index first
        picked.sort_unstable_by(|a, b| b.cmp(a));
        for i in picked {
            self.queue.remove(i);
        }

        let msg = MeshMessage {
            sender: self.id,
            node_id: delta,
            requests,
            replies,
        };
        self.stats.bytes_sent += msg.wire_size() as u64;
        msg
    }

    /// Returns an undeliverable store request to its sender's queue; the
    /// link layer reported no listener at the addressed hop.
    pub fn bounce_store(&mut self, key: TupleKey, value: TupleValue, age: u8) {
        self.queue.push(Queued::Store { key, value, age: age as u32 });
        self.enforce_queue_bound();
    }

    /// Returns an undeliverable reply to its sender's queue.
    pub fn bounce_reply(&mut self, reply: Reply) {
        self.queue.push(Queued::Reply { reply, age: 0 });
        self.enforce_queue_bound();
    }

    // ---- internals -----------------------------------------------------

    fn first_sight(&mut self, query: QueryId, from: AgentId) -> bool {
        if self.seen.contains_key(&query) {
            return false;
        }
        self.seen.insert(query, SeenRecord { predecessor: from, age: 0 });
        true
    }

    fn admit_store(&mut self, key: TupleKey, value: TupleValue, age: u8) {
        let delta = self.current_node_id();
        if delta > key.hash as u32 && self.available_memory() > 0 {
            self.insert_stored(key, value, delta, false);
        } else {
            self.queue.push(Queued::Store { key, value, age: age as u32 });
            self.enforce_queue_bound();
        }
    }

    fn insert_stored(&mut self, key: TupleKey, value: TupleValue, delta: u32, forced: bool) {
        self.events.stored.push((key.id, delta, key.hash, forced));
        if forced {
            self.stats.forced_stores += 1;
        }
        self.stored.insert(
            key.id,
            StoredTuple { key, value, accepted_node_id: delta, forced },
        );
    }

    /// Tuples at the location, both settled and still hunting for a home in
    /// the routing queue: a tuple in flight is part of the data structure.
    fn matches(&self, x: f32, y: f32, radius: f32) -> Vec<(TupleKey, TupleValue)> {
        let limit = if radius == 0.0 { self.cfg.location_epsilon } else { radius };
        let limit_sq = limit * limit;
        let near = |value: &TupleValue| {
            let dx = value.center[0] - x;
            let dy = value.center[1] - y;
            dx * dx + dy * dy <= limit_sq
        };
        let mut out: Vec<(TupleKey, TupleValue)> = self
            .stored
            .values()
            .filter(|t| near(&t.value))
            .map(|t| (t.key, t.value.clone()))
            .collect();
        out.extend(self.queue.iter().filter_map(|item| match item {
            Queued::Store { key, value, .. } if near(value) => Some((*key, value.clone())),
            _ => None,
        }));
        out
    }

    /// Removes matching tuples not in `keep`, settled or in flight.
    /// Matching consolidated tuples survive unless their id orders after
    /// the smallest kept id, so two concurrent consolidations of one
    /// location converge on the tuple with the lowest id instead of
    /// erasing each other.
    fn erase_matching(&mut self, x: f32, y: f32, radius: f32, keep: &[TupleId]) {
        let kept: BTreeSet<TupleId> = keep.iter().copied().collect();
        let min_kept = kept.iter().next().copied();
        let condemned = |key: &TupleKey, value: &TupleValue| {
            if kept.contains(&key.id) {
                return false;
            }
            match (value.consolidated, min_kept) {
                (true, Some(winner)) => key.id > winner,
                _ => true,
            }
        };
        let victims: Vec<TupleId> = self
            .matches(x, y, radius)
            .into_iter()
            .filter(|(key, value)| condemned(key, value))
            .map(|(key, _)| key.id)
            .collect();
        for id in &victims {
            self.stored.remove(id);
        }
        self.queue.retain(|item| match item {
            Queued::Store { key, .. } => !victims.contains(&key.id),
            _ => true,
        });
        self.events.erased.extend(victims);
    }

    /// A holder whose NodeID has grown past a queued tuple's hash keeps it.
    fn absorb_eligible_stores(&mut self) {
        let mut i = 0;
        while i < self.queue.len() {
            let delta = self.current_node_id();
            let absorb = matches!(
                &self.queue[i],
                Queued::Store { key, .. } if delta > key.hash as u32
            ) && self.available_memory() > 0;
            if absorb {
                let Queued::Store { key, value, .. } = self.queue.remove(i) else {
                    unreachable!()
                };
                self.insert_stored(key, value, delta, false);
            } else {
                i += 1;
            }
        }
    }

    /// Store requests past their TTL are kept by the current holder, making
    /// room by evicting its lowest-hash tuple back into the mesh.
    fn resolve_ttl_stores(&mut self) {
        let ttl = self.cfg.store_ttl;
        let mut i = 0;
        while i < self.queue.len() {
            let expired = matches!(&self.queue[i], Queued::Store { age, .. } if *age >= ttl);
            if !expired {
                i += 1;
                continue;
            }
            let Queued::Store { key, value, .. } = self.queue.remove(i) else {
                unreachable!()
            };
            if self.available_memory() == 0 {
                // evict the most certain tuple; it re-enters as a request
                // in the slot this resolution just freed
                let victim = self
                    .stored
                    .values()
                    .min_by_key(|t| (t.key.hash, t.key.id))
                    .map(|t| t.key.id)
                    .expect("zero available memory implies stored tuples");
                let out = self.stored.remove(&victim).unwrap();
                self.events.evicted.push(victim);
                self.queue.insert(
                    i,
                    Queued::Store { key: out.key, value: out.value, age: 0 },
                );
                i += 1;
            }
            let delta = self.current_node_id();
            self.insert_stored(key, value, delta, true);
        }
    }

    fn drop_expired_replies(&mut self) {
        let ttl = self.cfg.reply_ttl;
        let before = self.queue.len();
        let heard = &self.heard;
        self.queue.retain(|item| match item {
            Queued::Reply { reply, age } => *age < ttl || heard.contains_key(&reply.next_hop),
            _ => true,
        });
        self.stats.replies_dropped += (before - self.queue.len()) as u64;
    }

    /// Keeps the routing queue within capacity. Victims in order: gets,
    /// erases, replies, then store requests lowest-hash first; losing a
    /// store request loses a tuple and is recorded as such.
    fn enforce_queue_bound(&mut self) {
        while self.queue.len() > self.cfg.routing_capacity as usize {
            let victim = self
                .queue
                .iter()
                .enumerate()
                .min_by_key(|(_, item)| match item {
                    Queued::Get { query, .. } => (0u8, query.raw() as u64),
                    Queued::Erase { query, .. } => (1, query.raw() as u64),
                    Queued::Reply { reply, .. } => (2, reply.query.raw() as u64),
                    Queued::Store { key, .. } => {
                        (3, (key.hash as u64) << 32 | key.id.raw() as u64)
                    }
                })
                .map(|(i, _)| i)
                .expect("queue over capacity is nonempty");
            match self.queue.remove(victim) {
                Queued::Store { key, .. } => self.events.dropped_tuples.push(key.id),
                Queued::Reply { .. } => self.stats.replies_dropped += 1,
                _ => self.stats.floods_dropped += 1,
            }
        }
    }
}

/// Inboxes per agent after one delivery round.
pub type Inboxes = BTreeMap<AgentId, Vec<MeshMessage>>;
/// Store requests whose addressee was out of range, with their sender.
pub type StoreBounces = Vec<(AgentId, TupleKey, TupleValue, u8)>;
/// Replies whose next hop was out of range, with their sender.
pub type ReplyBounces = Vec<(AgentId, Reply)>;

/// Barrier-synchronized broadcast delivery over an arbitrary topology.
///
/// Every message reaches every current neighbor of its sender. Point-to-point
/// entries addressed to agents not in range bounce back: the returned lists
/// must be re-queued on their senders (the link layer saw no listener).
pub fn exchange(
    outboxes: &BTreeMap<AgentId, MeshMessage>,
    neighbors: &BTreeMap<AgentId, BTreeSet<AgentId>>,
) -> (Inboxes, StoreBounces, ReplyBounces) {
    let empty = BTreeSet::new();
    let mut inboxes: BTreeMap<AgentId, Vec<MeshMessage>> = BTreeMap::new();
    let mut store_bounces = Vec::new();
    let mut reply_bounces = Vec::new();
    for (&sender, msg) in outboxes {
        let reach = neighbors.get(&sender).unwrap_or(&empty);
        for &peer in reach {
            inboxes.entry(peer).or_default().push(msg.clone());
        }
        for req in &msg.requests {
            if let Request::Store { recipient, age, key, value } = req {
                if !reach.contains(recipient) {
                    store_bounces.push((sender, *key, value.clone(), *age));
                }
            }
        }
        for reply in &msg.replies {
            if !reach.contains(&reply.next_hop) {
                reply_bounces.push((sender, reply.clone()));
            }
        }
    }
    (inboxes, store_bounces, reply_bounces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::ClassId;

    fn value_at(x: f32, y: f32, class: u8, consolidated: bool) -> TupleValue {
        TupleValue {
            class: ClassId(class),
            consolidated,
            center: [x, y, 0.2],
            yaw: 0.0,
            front_right: [0.2, -0.2, 0.2],
        }
    }

    fn isolated_node(id: u16) -> NodeState {
        NodeState::new(AgentId(id), NodeConfig::default())
    }

    /// Pretend the node heard a neighbor advertising a NodeID this step.
    fn hear(node: &mut NodeState, from: u16, delta: u32) {
        node.receive(MeshMessage {
            sender: AgentId(from),
            node_id: delta,
            requests: vec![],
            replies: vec![],
        });
    }

    #[test]
    fn creator_with_high_node_id_stores_locally() {
        let mut node = isolated_node(1);
        hear(&mut node, 2, 40);
        hear(&mut node, 3, 7);
        hear(&mut node, 4, 12);
        node.process_inbox();
        // delta = 20 free * 3 neighbors = 60 > 5
        let key = node.local_store(5, value_at(1.0, 1.0, 3, false));
        assert_eq!(node.stored_count(), 1);
        assert_eq!(node.queue_len(), 0);
        // delta = 20 free slots * 3 neighbors
        assert_eq!(node.events.stored, vec![(key.id, 60, 5, false)]);
    }

    #[test]
    fn isolated_creator_queues_then_hands_off_when_a_neighbor_appears() {
        let mut node = isolated_node(1);
        node.process_inbox();
        // isolated: delta = 1, not above hash 65
        node.local_store(65, value_at(1.0, 1.0, 9, false));
        assert_eq!(node.stored_count(), 0);
        assert_eq!(node.queue_len(), 1);
        let out = node.finish_step();
        assert!(out.requests.is_empty(), "no neighbor, nothing to send");
        assert_eq!(node.queue_len(), 1);

        node.begin_step();
        hear(&mut node, 2, 80);
        node.process_inbox();
        let out = node.finish_step();
        assert_eq!(out.requests.len(), 1);
        assert!(matches!(
            out.requests[0],
            Request::Store { recipient: AgentId(2), .. }
        ));
        assert_eq!(node.queue_len(), 0, "ownership moved into the message");
    }

    #[test]
    fn creator_absorbs_its_own_request_once_connectivity_returns() {
        let mut node = isolated_node(1);
        node.process_inbox();
        node.local_store(5, value_at(1.0, 1.0, 3, false)); // isolated: queued
        node.finish_step();
        node.begin_step();
        hear(&mut node, 2, 80);
        node.process_inbox();
        // own delta is now 19 * 1 = 19 > 5: the creator keeps the tuple
        let out = node.finish_step();
        assert!(out.requests.is_empty());
        assert_eq!(node.stored_count(), 1);
        assert!(node.acceptance_audit_ok());
    }

    #[test]
    fn store_forwards_to_highest_node_id_neighbor() {
        let mut node = isolated_node(1);
        hear(&mut node, 4, 50);
        hear(&mut node, 2, 90);
        hear(&mut node, 9, 90); // tie broken toward the lower id
        node.process_inbox();
        node.local_store(65, value_at(0.0, 0.0, 9, false)); // delta 30 <= 65
        let out = node.finish_step();
        assert!(matches!(
            out.requests[0],
            Request::Store { recipient: AgentId(2), .. }
        ));
    }

    #[test]
    fn incoming_store_below_node_id_is_absorbed() {
        let mut node = isolated_node(2);
        hear(&mut node, 1, 3);
        node.receive(MeshMessage {
            sender: AgentId(1),
            node_id: 3,
            requests: vec![Request::Store {
                recipient: AgentId(2),
                age: 4,
                key: TupleKey { id: TupleId::new(AgentId(1), 0), hash: 5 },
                value: value_at(1.0, 1.0, 3, false),
            }],
            replies: vec![],
        });
        node.process_inbox();
        assert_eq!(node.stored_count(), 1, "delta 20 > rho 5: absorbed");
        assert!(node.acceptance_audit_ok());
    }

    #[test]
    fn store_addressed_elsewhere_is_discarded_on_receive() {
        let mut node = isolated_node(3);
        node.receive(MeshMessage {
            sender: AgentId(1),
            node_id: 3,
            requests: vec![Request::Store {
                recipient: AgentId(2),
                age: 0,
                key: TupleKey { id: TupleId::new(AgentId(1), 0), hash: 5 },
                value: value_at(1.0, 1.0, 3, false),
            }],
            replies: vec![],
        });
        node.process_inbox();
        assert_eq!(node.stored_count(), 0);
        assert_eq!(node.queue_len(), 0);
    }

    #[test]
    fn ttl_fallback_stores_at_holder_and_evicts_when_full() {
        let mut cfg = NodeConfig::default();
        cfg.storage_capacity = 2;
        cfg.store_ttl = 3;
        let mut node = NodeState::new(AgentId(1), cfg);
        // fill storage with two certain tuples via direct admission
        hear(&mut node, 2, 1);
        node.process_inbox();
        // total free memory comfortably beats bucket zero
        node.local_store(0, value_at(0.0, 0.0, 1, true));
        node.local_store(0, value_at(1.0, 0.0, 2, true));
        assert_eq!(node.stored_count(), 2);
        // a high-hash tuple that nobody accepts
        node.local_store(65, value_at(2.0, 0.0, 9, false));
        assert_eq!(node.queue_len(), 1);
        for _ in 0..3 {
            node.begin_step();
            node.process_inbox();
            node.finish_step(); // isolated now: request just ages
        }
        // TTL hit: holder keeps the wanderer, evicting the hash-0 tuple
        assert_eq!(node.stored_count(), 2);
        assert_eq!(node.events.evicted.len(), 1);
        assert_eq!(node.queue_len(), 1, "evicted tuple is hunting again");
        assert_eq!(node.stats.forced_stores, 1);
        let hashes: Vec<u16> = node.stored_tuples().map(|(k, _)| k.hash).collect();
        assert!(hashes.contains(&65) && hashes.contains(&0));
    }

    #[test]
    fn get_floods_once_and_replies_with_matches() {
        let mut node = isolated_node(2);
        hear(&mut node, 1, 9);
        node.process_inbox();
        node.local_store(0, value_at(3.0, 4.0, 7, false));
        assert_eq!(node.stored_count(), 1);

        let query = QueryId::new(AgentId(1), 0);
        let get = Request::Get { query, x: 3.0, y: 4.0, radius: 0.0 };
        node.begin_step();
        hear(&mut node, 1, 9);
        node.receive(MeshMessage {
            sender: AgentId(1),
            node_id: 9,
            requests: vec![get.clone()],
            replies: vec![],
        });
        node.process_inbox();
        let out = node.finish_step();
        assert_eq!(out.replies.len(), 1, "one match, one reply");
        assert_eq!(out.replies[0].next_hop, AgentId(1));
        assert_eq!(out.requests.len(), 1, "flood propagates");

        // the same query arriving again is suppressed
        node.begin_step();
        hear(&mut node, 3, 5);
        node.receive(MeshMessage {
            sender: AgentId(3),
            node_id: 5,
            requests: vec![get],
            replies: vec![],
        });
        node.process_inbox();
        let out = node.finish_step();
        assert!(out.replies.is_empty());
        assert!(out.requests.is_empty());
    }

    #[test]
    fn reply_routes_along_recorded_reverse_path() {
        // topology 1 - 2 - 3; node 2 relays the query and then the reply
        let mut node = isolated_node(2);
        let query = QueryId::new(AgentId(1), 0);
        node.begin_step();
        hear(&mut node, 1, 9);
        node.receive(MeshMessage {
            sender: AgentId(1),
            node_id: 9,
            requests: vec![Request::Get { query, x: 0.0, y: 0.0, radius: 1.0 }],
            replies: vec![],
        });
        node.process_inbox();
        node.finish_step();

        node.begin_step();
        hear(&mut node, 1, 9);
        hear(&mut node, 3, 9);
        node.receive(MeshMessage {
            sender: AgentId(3),
            node_id: 9,
            requests: vec![],
            replies: vec![Reply {
                query,
                next_hop: AgentId(2),
                key: TupleKey { id: TupleId::new(AgentId(3), 0), hash: 5 },
                value: value_at(0.0, 0.0, 4, false),
            }],
        });
        node.process_inbox();
        let out = node.finish_step();
        assert_eq!(out.replies.len(), 1);
        assert_eq!(out.replies[0].next_hop, AgentId(1), "toward the originator");
    }

    #[test]
    fn reply_holds_while_hop_is_away_then_expires() {
        let mut cfg = NodeConfig::default();
        cfg.reply_ttl = 4;
        let mut node = NodeState::new(AgentId(2), cfg);
        let query = QueryId::new(AgentId(1), 0);
        node.begin_step();
        hear(&mut node, 1, 9);
        node.receive(MeshMessage {
            sender: AgentId(1),
            node_id: 9,
            requests: vec![Request::Get { query, x: 0.0, y: 0.0, radius: 1.0 }],
            replies: vec![],
        });
        node.process_inbox();
        node.finish_step();

        // reply arrives from downstream, but agent 1 is out of range now
        node.begin_step();
        hear(&mut node, 3, 9);
        node.receive(MeshMessage {
            sender: AgentId(3),
            node_id: 9,
            requests: vec![],
            replies: vec![Reply {
                query,
                next_hop: AgentId(2),
                key: TupleKey { id: TupleId::new(AgentId(3), 0), hash: 5 },
                value: value_at(0.0, 0.0, 4, false),
            }],
        });
        node.process_inbox();
        for _ in 0..3 {
            let out = node.finish_step();
            assert!(out.replies.is_empty(), "held while the hop is absent");
            assert_eq!(node.queue_len(), 1);
            node.begin_step();
            node.process_inbox();
        }
        node.finish_step();
        assert_eq!(node.queue_len(), 0, "expired after reply_ttl steps");
        assert!(node.stats.replies_dropped >= 1);
    }

    #[test]
    fn erase_except_removes_everything_but_the_kept_tuple() {
        let mut node = isolated_node(2);
        hear(&mut node, 1, 1);
        node.process_inbox();
        let k1 = node.local_store(0, value_at(1.0, 1.0, 3, false));
        let k2 = node.local_store(0, value_at(1.0, 1.0, 5, false));
        let kept = node.local_store(0, value_at(1.0, 1.0, 4, true));
        let elsewhere = node.local_store(0, value_at(4.0, 4.0, 2, false));
        assert_eq!(node.stored_count(), 4);

        node.local_erase(1.0, 1.0, 0.0, vec![kept.id]);
        let held: Vec<TupleId> = node.stored_tuples().map(|(k, _)| k.id).collect();
        assert_eq!(held, vec![kept.id, elsewhere.id]);
        let mut erased = node.events.erased.clone();
        erased.sort();
        assert_eq!(erased, vec![k1.id, k2.id]);

        // idempotent: a second pass changes nothing
        node.local_erase(1.0, 1.0, 0.0, vec![kept.id]);
        assert_eq!(node.stored_count(), 2);
    }

    #[test]
    fn racing_consolidations_converge_to_the_lowest_id() {
        // two consolidated tuples at one location, each erase keeping its
        // own: the lower id must survive both orders
        let mut node = isolated_node(2);
        hear(&mut node, 1, 1);
        node.process_inbox();
        let first = node.local_store(0, value_at(1.0, 1.0, 3, true));
        let second = node.local_store(0, value_at(1.0, 1.0, 5, true));
        assert!(first.id < second.id);
        node.local_erase(1.0, 1.0, 0.0, vec![second.id]);
        // the erase keeping the larger id does not kill the smaller one
        assert!(node.stored_tuples().any(|(k, _)| k.id == first.id));
        node.local_erase(1.0, 1.0, 0.0, vec![first.id]);
        let held: Vec<TupleId> = node.stored_tuples().map(|(k, _)| k.id).collect();
        assert_eq!(held, vec![first.id], "exactly the lowest id survives");
    }

    #[test]
    fn empty_keep_list_clears_the_location() {
        let mut node = isolated_node(2);
        hear(&mut node, 1, 1);
        node.process_inbox();
        node.local_store(0, value_at(1.0, 1.0, 3, false));
        node.local_store(0, value_at(1.0, 1.0, 5, false));
        node.local_erase(1.0, 1.0, 0.0, vec![]);
        assert_eq!(node.stored_count(), 0);
    }

    #[test]
    fn queue_overflow_prefers_dropping_floods_over_tuples() {
        let mut cfg = NodeConfig::default();
        cfg.routing_capacity = 2;
        let mut node = NodeState::new(AgentId(1), cfg);
        node.process_inbox();
        // two wandering stores fill the queue (isolated: delta=1 <= 5)
        node.local_store(5, value_at(0.0, 0.0, 3, false));
        node.local_store(10, value_at(1.0, 0.0, 4, false));
        assert_eq!(node.queue_len(), 2);
        // an incoming flood overflows: it is the victim, not the stores
        node.begin_step();
        node.receive(MeshMessage {
            sender: AgentId(2),
            node_id: 1,
            requests: vec![Request::Get {
                query: QueryId::new(AgentId(2), 0),
                x: 0.0,
                y: 0.0,
                radius: 1.0,
            }],
            replies: vec![],
        });
        node.process_inbox();
        assert_eq!(node.queue_len(), 2);
        assert_eq!(node.stats.floods_dropped, 1);
        assert!(node.events.dropped_tuples.is_empty());
        assert_eq!(node.queued_store_ids().len(), 2);
    }

    #[test]
    fn bandwidth_cap_defers_low_priority_entries() {
        let mut cfg = NodeConfig::default();
        cfg.bandwidth_cap = HEADER_WIRE_SIZE + 50; // room for one entry
        let mut node = NodeState::new(AgentId(1), cfg);
        node.begin_step();
        hear(&mut node, 2, 90);
        node.receive(MeshMessage {
            sender: AgentId(2),
            node_id: 90,
            requests: vec![Request::Get {
                query: QueryId::new(AgentId(2), 0),
                x: 5.0,
                y: 5.0,
                radius: 1.0,
            }],
            replies: vec![],
        });
        node.process_inbox();
        node.local_store(65, value_at(0.0, 0.0, 9, false)); // delta 19 <= 65
        let out = node.finish_step();
        // store outranks the get flood and fits; the get waits
        assert_eq!(out.requests.len(), 1);
        assert!(matches!(out.requests[0], Request::Store { .. }));
        assert_eq!(node.queue_len(), 1);
        node.begin_step();
        hear(&mut node, 2, 90);
        node.process_inbox();
        let out = node.finish_step();
        assert!(matches!(out.requests[0], Request::Get { .. }));
    }

    #[test]
    fn queued_store_is_absorbed_once_node_id_recovers() {
        let mut node = isolated_node(1);
        node.process_inbox();
        node.local_store(5, value_at(0.0, 0.0, 3, false)); // isolated: queued
        assert_eq!(node.queue_len(), 1);
        node.begin_step();
        hear(&mut node, 2, 2); // now delta = 10 * 1 = 10 > 5
        node.process_inbox();
        node.finish_step();
        assert_eq!(node.stored_count(), 1);
        assert_eq!(node.queue_len(), 0);
        assert!(node.acceptance_audit_ok());
    }
}
