//! Bit-exact broadcast message layout, little-endian throughout.
//!
//! ```text
//! message := header || requests || replies
//! header  := sender:u16  node_id:u32  request_count:u8  reply_count:u8   (8 B)
//! request := kind:u8 || body
//!   kind 0 store: recipient:u16  age:u8  tuple                          (40 B)
//!   kind 1 get:   query:u32  x:f32  y:f32  r:f32                        (17 B)
//!   kind 2 erase: query:u32  x:f32  y:f32  r:f32  keep_count:u8
//!                 keep_count * tuple_id:u32
//! reply   := query:u32  next_hop:u16  tuple                             (42 B)
//! tuple   := id:u32  hash:u16  class:u8  flags:u8
//!            cx:f32 cy:f32 cz:f32 yaw:f32 frx:f32 fry:f32 frz:f32       (36 B)
//! ```
//!
//! Byte counts are part of the contract: bandwidth metering sums exactly
//! these sizes.

use crate::classes::ClassId;

use super::tuple::{AgentId, TupleId, TupleKey, TupleValue};
use super::MeshError;

pub const HEADER_WIRE_SIZE: usize = 8;
pub const TUPLE_ENTRY_WIRE_SIZE: usize = 36;
pub const REPLY_WIRE_SIZE: usize = 4 + 2 + TUPLE_ENTRY_WIRE_SIZE;

const KIND_STORE: u8 = 0;
const KIND_GET: u8 = 1;
const KIND_ERASE: u8 = 2;
const FLAG_CONSOLIDATED: u8 = 1;

/// Query identifier: originating agent in the high half, that agent's
/// running query count in the low half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryId(u32);

impl QueryId {
    pub fn new(originator: AgentId, sequence: u16) -> QueryId {
        QueryId((originator.0 as u32) << 16 | sequence as u32)
    }

    pub fn originator(self) -> AgentId {
        AgentId((self.0 >> 16) as u16)
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn from_raw(raw: u32) -> QueryId {
        QueryId(raw)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    /// Point-to-point: only `recipient` may act on it; everyone else
    /// discards it during deserialization.
    Store {
        recipient: AgentId,
        /// Steps this request has spent looking for a home.
        age: u8,
        key: TupleKey,
        value: TupleValue,
    },
    /// Flooded: return every tuple within `radius` of the point.
    Get {
        query: QueryId,
        x: f32,
        y: f32,
        radius: f32,
    },
    /// Flooded: delete every matching tuple whose id is not in `keep`.
    Erase {
        query: QueryId,
        x: f32,
        y: f32,
        radius: f32,
        keep: Vec<TupleId>,
    },
}

impl Request {
    pub fn wire_size(&self) -> usize {
        1 + match self {
            Request::Store { .. } => 2 + 1 + TUPLE_ENTRY_WIRE_SIZE,
            Request::Get { .. } => 4 + 12,
            Request::Erase { keep, .. } => 4 + 12 + 1 + 4 * keep.len(),
        }
    }
}

/// Point-to-point hop of a query result back toward its originator.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub query: QueryId,
    pub next_hop: AgentId,
    pub key: TupleKey,
    pub value: TupleValue,
}

/// One broadcast per agent per step.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshMessage {
    pub sender: AgentId,
    pub node_id: u32,
    pub requests: Vec<Request>,
    pub replies: Vec<Reply>,
}

impl MeshMessage {
    pub fn wire_size(&self) -> usize {
        HEADER_WIRE_SIZE
            + self.requests.iter().map(Request::wire_size).sum::<usize>()
            + self.replies.len() * REPLY_WIRE_SIZE
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn tuple(&mut self, key: &TupleKey, value: &TupleValue) {
        self.u32(key.id.raw());
        self.u16(key.hash);
        self.u8(value.class.0);
        self.u8(if value.consolidated { FLAG_CONSOLIDATED } else { 0 });
        for c in value.center {
            self.f32(c);
        }
        self.f32(value.yaw);
        for c in value.front_right {
            self.f32(c);
        }
    }
}

pub fn encode(msg: &MeshMessage) -> Result<Vec<u8>, MeshError> {
    if msg.requests.len() > 255 {
        return Err(MeshError::TooManyEntries(msg.requests.len()));
    }
    if msg.replies.len() > 255 {
        return Err(MeshError::TooManyEntries(msg.replies.len()));
    }
    let mut w = Writer(Vec::with_capacity(msg.wire_size()));
    w.u16(msg.sender.0);
    w.u32(msg.node_id);
    w.u8(msg.requests.len() as u8);
    w.u8(msg.replies.len() as u8);
    for req in &msg.requests {
        match req {
            Request::Store { recipient, age, key, value } => {
                w.u8(KIND_STORE);
                w.u16(recipient.0);
                w.u8(*age);
                w.tuple(key, value);
            }
            Request::Get { query, x, y, radius } => {
                w.u8(KIND_GET);
                w.u32(query.raw());
                w.f32(*x);
                w.f32(*y);
                w.f32(*radius);
            }
            Request::Erase { query, x, y, radius, keep } => {
                if keep.len() > 255 {
                    return Err(MeshError::TooManyEntries(keep.len()));
                }
                w.u8(KIND_ERASE);
                w.u32(query.raw());
                w.f32(*x);
                w.f32(*y);
                w.f32(*radius);
                w.u8(keep.len() as u8);
                for id in keep {
                    w.u32(id.raw());
                }
            }
        }
    }
    for reply in &msg.replies {
        w.u32(reply.query.raw());
        w.u16(reply.next_hop.0);
        w.tuple(&reply.key, &reply.value);
    }
    debug_assert_eq!(w.0.len(), msg.wire_size());
    Ok(w.0)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MeshError> {
        if self.pos + n > self.buf.len() {
            return Err(MeshError::Truncated {
                needed: self.pos + n - self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, MeshError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, MeshError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, MeshError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, MeshError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn tuple(&mut self) -> Result<(TupleKey, TupleValue), MeshError> {
        let id = TupleId::from_raw(self.u32()?);
        let hash = self.u16()?;
        let class = ClassId(self.u8()?);
        let flags = self.u8()?;
        let center = [self.f32()?, self.f32()?, self.f32()?];
        let yaw = self.f32()?;
        let front_right = [self.f32()?, self.f32()?, self.f32()?];
        Ok((
            TupleKey { id, hash },
            TupleValue {
                class,
                consolidated: flags & FLAG_CONSOLIDATED != 0,
                center,
                yaw,
                front_right,
            },
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<MeshMessage, MeshError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let sender = AgentId(r.u16()?);
    let node_id = r.u32()?;
    let request_count = r.u8()?;
    let reply_count = r.u8()?;
    let mut requests = Vec::with_capacity(request_count as usize);
    for _ in 0..request_count {
        let kind = r.u8()?;
        requests.push(match kind {
            KIND_STORE => {
                let recipient = AgentId(r.u16()?);
                let age = r.u8()?;
                let (key, value) = r.tuple()?;
                Request::Store { recipient, age, key, value }
            }
            KIND_GET => Request::Get {
                query: QueryId::from_raw(r.u32()?),
                x: r.f32()?,
                y: r.f32()?,
                radius: r.f32()?,
            },
            KIND_ERASE => {
                let query = QueryId::from_raw(r.u32()?);
                let x = r.f32()?;
                let y = r.f32()?;
                let radius = r.f32()?;
                let keep_count = r.u8()?;
                let mut keep = Vec::with_capacity(keep_count as usize);
                for _ in 0..keep_count {
                    keep.push(TupleId::from_raw(r.u32()?));
                }
                Request::Erase { query, x, y, radius, keep }
            }
            other => return Err(MeshError::BadRequestKind(other)),
        });
    }
    let mut replies = Vec::with_capacity(reply_count as usize);
    for _ in 0..reply_count {
        let query = QueryId::from_raw(r.u32()?);
        let next_hop = AgentId(r.u16()?);
        let (key, value) = r.tuple()?;
        replies.push(Reply { query, next_hop, key, value });
    }
    if r.pos != bytes.len() {
        return Err(MeshError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(MeshMessage { sender, node_id, requests, replies })
}
