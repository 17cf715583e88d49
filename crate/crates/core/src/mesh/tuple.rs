//! Tuple identity, payload, and the uncertainty staircase that places
//! annotations in the store.

use crate::classes::{ClassId, ClassModel};

use super::MeshError;

/// Agent identifier; doubles as the upper half of every tuple id the agent
/// creates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u16);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// System-wide unique tuple identifier: creator id in the high half,
/// the creator's running creation count in the low half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleId(u32);

impl TupleId {
    pub fn new(creator: AgentId, sequence: u16) -> TupleId {
        TupleId((creator.0 as u32) << 16 | sequence as u32)
    }

    pub fn creator(self) -> AgentId {
        AgentId((self.0 >> 16) as u16)
    }

    pub fn sequence(self) -> u16 {
        self.0 as u16
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn from_raw(raw: u32) -> TupleId {
        TupleId(raw)
    }
}

impl std::fmt::Display for TupleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.creator().0, self.sequence())
    }
}

/// Key under which a tuple is stored and addressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleKey {
    pub id: TupleId,
    /// Uncertainty bucket; the tuple may only rest on an agent whose NodeID
    /// exceeds it.
    pub hash: u16,
}

/// An annotated 3D bounding box, the unit of shared storage.
#[derive(Debug, Clone, PartialEq)]
pub struct TupleValue {
    pub class: ClassId,
    /// Set on annotations produced by a plurality vote; consolidated
    /// annotations are never re-consolidated.
    pub consolidated: bool,
    pub center: [f32; 3],
    pub yaw: f32,
    /// Vector from the box center to its front-right corner.
    pub front_right: [f32; 3],
}

impl TupleValue {
    /// Planar distance from the box center to a query point.
    pub fn distance_xy(&self, x: f32, y: f32) -> f32 {
        let dx = self.center[0] - x;
        let dy = self.center[1] - y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Dynamic willingness/desirability score of an agent: free memory times
/// neighbor count, or 1 when the agent is isolated.
pub fn node_id(available_memory: u32, neighbor_count: u32) -> u32 {
    if neighbor_count > 0 {
        available_memory * neighbor_count
    } else {
        1
    }
}

/// Staircase from annotation class to hash bucket, increasing with the
/// uncertainty (one minus accuracy) of the class. Consolidated annotations
/// are certain by construction and map to bucket zero.
#[derive(Debug, Clone)]
pub struct HashStaircase {
    step: u16,
    bucket_by_class: Vec<u16>,
}

impl HashStaircase {
    pub fn new(model: &ClassModel, step: u16) -> Result<Self, MeshError> {
        if step == 0 {
            return Err(MeshError::ZeroStep);
        }
        // rank classes by accuracy, most accurate first
        let mut order: Vec<ClassId> = model.ids().collect();
        order.sort_by(|&a, &b| {
            let pa = model.accuracy(a).expect("id from model");
            let pb = model.accuracy(b).expect("id from model");
            pb.partial_cmp(&pa).unwrap().then(a.cmp(&b))
        });
        let mut bucket_by_class = vec![0u16; model.class_count() as usize];
        for (rank, id) in order.iter().enumerate() {
            bucket_by_class[id.index()] = step * (1 + rank as u16);
        }
        Ok(HashStaircase { step, bucket_by_class })
    }

    pub fn bucket(&self, class: ClassId, consolidated: bool) -> Result<u16, MeshError> {
        let slot = self
            .bucket_by_class
            .get(class.index())
            .filter(|_| class.0 >= 1)
            .ok_or(MeshError::UnknownClass(class))?;
        Ok(if consolidated { 0 } else { *slot })
    }

    pub fn step(&self) -> u16 {
        self.step
    }

    pub fn max_bucket(&self) -> u16 {
        self.step * self.bucket_by_class.len() as u16
    }
}
