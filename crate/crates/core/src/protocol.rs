//! Deterministic state-machine interfaces implemented by every protocol,
//! whether a consensus target or a model-simulation wrapper.
//!
//! Internal states and payloads are opaque byte strings owned by the
//! protocol, so engines stay protocol-agnostic and wrappers can nest
//! arbitrary inner protocols.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::types::{Bit, ProcessId};

/// Identity of the process a protocol call is made on behalf of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProcessCtx {
    pub pid: ProcessId,
    pub n: usize,
}

impl ProcessCtx {
    pub fn new(pid: ProcessId, n: usize) -> Self {
        ProcessCtx { pid, n }
    }

    pub fn others(&self) -> impl Iterator<Item = ProcessId> + '_ {
        ProcessId::all(self.n).filter(move |&q| q != self.pid)
    }
}

/// Messages received in one synchronous round, ascending by sender.
pub type Inbox<'a> = [(ProcessId, &'a [u8])];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub internal: Vec<u8>,
    pub output: Option<Bit>,
}

/// A protocol for the synchronous round-by-round models.
///
/// Every round each process broadcasts `message`, then applies `transition`
/// to whatever subset of the other processes' messages the adversary lets
/// through. All methods must be pure functions of their arguments.
pub trait RoundProtocol: Send + Sync {
    fn id(&self) -> String;

    fn init(&self, ctx: ProcessCtx, input: Bit) -> Vec<u8>;

    fn message(&self, ctx: ProcessCtx, internal: &[u8], round: u64) -> Result<Vec<u8>, ProtocolError>;

    fn transition(&self, ctx: ProcessCtx, internal: &[u8], round: u64, received: &Inbox<'_>) -> Result<Transition, ProtocolError>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AsyncStep {
    pub internal: Vec<u8>,
    pub sends: Vec<(ProcessId, Vec<u8>)>,
    pub output: Option<Bit>,
}

/// A protocol for the asynchronous model. A step optionally consumes one
/// message, updates the state, and sends any number of messages.
pub trait AsyncProtocol: Send + Sync {
    fn id(&self) -> String;

    fn init(&self, ctx: ProcessCtx, input: Bit) -> Vec<u8>;

    fn step(&self, ctx: ProcessCtx, internal: &[u8], incoming: Option<(ProcessId, &[u8])>) -> Result<AsyncStep, ProtocolError>;
}

/// Either kind of protocol, as resolved from a registry id.
#[derive(Clone)]
pub enum AnyProtocol {
    Round(Arc<dyn RoundProtocol>),
    Async(Arc<dyn AsyncProtocol>),
}

impl AnyProtocol {
    pub fn id(&self) -> String {
        match self {
            AnyProtocol::Round(p) => p.id(),
            AnyProtocol::Async(p) => p.id(),
        }
    }

    pub fn as_round(&self) -> Option<&Arc<dyn RoundProtocol>> {
        match self {
            AnyProtocol::Round(p) => Some(p),
            AnyProtocol::Async(_) => None,
        }
    }

    pub fn as_async(&self) -> Option<&Arc<dyn AsyncProtocol>> {
        match self {
            AnyProtocol::Async(p) => Some(p),
            AnyProtocol::Round(_) => None,
        }
    }
}

impl std::fmt::Debug for AnyProtocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnyProtocol::Round(p) => write!(f, "Round({})", p.id()),
            AnyProtocol::Async(p) => write!(f, "Async({})", p.id()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed payload from {from}: {reason}")]
    MalformedPayload { from: ProcessId, reason: String },
    #[error("malformed internal state: {0}")]
    MalformedState(String),
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),
    #[error("{0}")]
    Unsupported(String),
}

/// Encodes a wrapper's typed state or payload.
pub fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    bincode::serialize(value).expect("in-memory serialization cannot fail")
}

pub fn decode_state<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ProtocolError> {
    bincode::deserialize(bytes).map_err(|e| ProtocolError::MalformedState(e.to_string()))
}

pub fn decode_payload<T: DeserializeOwned>(from: ProcessId, bytes: &[u8]) -> Result<T, ProtocolError> {
    bincode::deserialize(bytes).map_err(|e| ProtocolError::MalformedPayload {
        from,
        reason: e.to_string(),
    })
}
