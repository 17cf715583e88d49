//! The shared tuple store: each agent runs one [`NodeState`] and exchanges
//! one broadcast message per step with its neighbors.
//!
//! Tuples carry a hash that grows with annotation uncertainty; an agent's
//! NodeID grows with free memory and connectivity. A tuple is handed from
//! agent to agent until it reaches one whose NodeID exceeds the hash, so
//! uncertain annotations gravitate toward well-placed agents, which is what
//! makes them easy to query and consolidate later.

mod node;
mod tuple;
mod wire;

pub use node::{exchange, Inboxes, NodeConfig, NodeState, QueryDelivery, ReplyBounces, StepEvents, StoreBounces};
pub use tuple::{node_id, AgentId, HashStaircase, TupleId, TupleKey, TupleValue};
pub use wire::{
    decode, encode, MeshMessage, QueryId, Reply, Request, HEADER_WIRE_SIZE, REPLY_WIRE_SIZE,
    TUPLE_ENTRY_WIRE_SIZE,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("staircase step must be at least 1")]
    ZeroStep,
    #[error("class {0} is not in the catalog")]
    UnknownClass(crate::classes::ClassId),
    #[error("message truncated: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("unknown request kind {0}")]
    BadRequestKind(u8),
    #[error("{0} trailing bytes after the last entry")]
    TrailingBytes(usize),
    #[error("too many entries for one message: {0} (wire maximum 255)")]
    TooManyEntries(usize),
}
