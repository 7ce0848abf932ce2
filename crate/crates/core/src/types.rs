//! Domain types shared by every engine: process identifiers, binary values,
//! local states, configurations, and the per-round fault shapes of the two
//! synchronous models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};

/// Index of a process in `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub usize);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0
    }

    /// All process ids of an `n`-process system, ascending.
    pub fn all(n: usize) -> impl Iterator<Item = ProcessId> + Clone {
        (0..n).map(ProcessId)
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A binary consensus value. Serialized as the integer `0` or `1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn from_bool(b: bool) -> Bit {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

impl Not for Bit {
    type Output = Bit;

    fn not(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> u8 {
        b.as_u8()
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;

    fn try_from(v: u8) -> Result<Bit, String> {
        match v {
            0 => Ok(Bit::Zero),
            1 => Ok(Bit::One),
            other => Err(format!("binary value expected, got {other}")),
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Parses `"0,1,1"` or `"011"` into an input vector.
pub fn parse_bits(s: &str) -> Result<Vec<Bit>, String> {
    let digits: Vec<&str> = if s.contains(',') {
        s.split(',').map(str::trim).collect()
    } else {
        s.trim().split("").filter(|c| !c.is_empty()).collect()
    };
    digits
        .into_iter()
        .map(|d| match d {
            "0" => Ok(Bit::Zero),
            "1" => Ok(Bit::One),
            other => Err(format!("invalid binary value {other:?}")),
        })
        .collect()
}

/// Local state of one process: read-only input, protocol-owned internal
/// state, and a write-once output register.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LocalState {
    pub input: Bit,
    pub internal: Vec<u8>,
    pub output: Option<Bit>,
}

/// Snapshot of every process's local state at the start of `round`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub round: u64,
    pub states: Vec<LocalState>,
}

impl Configuration {
    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, pid: ProcessId) -> &LocalState {
        &self.states[pid.0]
    }

    pub fn inputs(&self) -> Vec<Bit> {
        self.states.iter().map(|s| s.input).collect()
    }

    pub fn outputs(&self) -> BTreeMap<ProcessId, Bit> {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.output.map(|b| (ProcessId(i), b)))
            .collect()
    }

    pub fn output_count(&self) -> usize {
        self.states.iter().filter(|s| s.output.is_some()).count()
    }

    pub fn all_output(&self) -> bool {
        self.states.iter().all(|s| s.output.is_some())
    }

    /// Processes whose local state differs between `self` and `other`.
    /// Configurations of different size or round differ everywhere.
    pub fn differing_processes(&self, other: &Configuration) -> Vec<ProcessId> {
        if self.n() != other.n() || self.round != other.round {
            return ProcessId::all(self.n().max(other.n())).collect();
        }
        self.states
            .iter()
            .zip(&other.states)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| ProcessId(i))
            .collect()
    }
}

/// Fail-to-send adversary choice for one round: `sender`'s broadcast is not
/// received by any process in `victims`.
///
/// The canonical form never lists the sender among its own victims, since a
/// process does not send to itself.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoundFault {
    sender: ProcessId,
    victims: BTreeSet<ProcessId>,
}

impl RoundFault {
    pub fn new(sender: ProcessId, victims: impl IntoIterator<Item = ProcessId>) -> Self {
        let victims = victims.into_iter().filter(|&v| v != sender).collect();
        RoundFault { sender, victims }
    }

    /// A fault-free round. Every sender with no victims is equivalent; process 0
    /// is used as the canonical representative.
    pub fn none() -> Self {
        RoundFault::new(ProcessId(0), [])
    }

    /// `p`'s message is lost at every other process.
    pub fn silent(p: ProcessId, n: usize) -> Self {
        RoundFault::new(p, ProcessId::all(n))
    }

    pub fn sender(&self) -> ProcessId {
        self.sender
    }

    pub fn victims(&self) -> &BTreeSet<ProcessId> {
        &self.victims
    }

    pub fn is_fault_free(&self) -> bool {
        self.victims.is_empty()
    }

    /// True when every other process misses the sender's message.
    pub fn is_full_silence(&self, n: usize) -> bool {
        self.victims.len() + 1 == n
    }

    pub fn delivers(&self, from: ProcessId, to: ProcessId) -> bool {
        !(from == self.sender && self.victims.contains(&to))
    }

    /// The equivalent fail-to-receive fault: each victim drops the sender.
    pub fn to_receive_fault(&self) -> ReceiveFault {
        ReceiveFault {
            dropped: self.victims.iter().map(|&v| (v, self.sender)).collect(),
        }
    }
}

/// Fail-to-receive adversary choice for one round: each receiver misses at
/// most one sender.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReceiveFault {
    dropped: BTreeMap<ProcessId, ProcessId>,
}

impl ReceiveFault {
    /// Builds a drop map, rejecting self-drops.
    pub fn new(dropped: impl IntoIterator<Item = (ProcessId, ProcessId)>) -> Result<Self, FaultShapeError> {
        let mut map = BTreeMap::new();
        for (receiver, sender) in dropped {
            if receiver == sender {
                return Err(FaultShapeError::SelfDrop(receiver));
            }
            if map.insert(receiver, sender).is_some() {
                return Err(FaultShapeError::DuplicateReceiver(receiver));
            }
        }
        Ok(ReceiveFault { dropped: map })
    }

    pub fn none() -> Self {
        ReceiveFault::default()
    }

    pub fn dropped(&self) -> &BTreeMap<ProcessId, ProcessId> {
        &self.dropped
    }

    pub fn dropped_at(&self, receiver: ProcessId) -> Option<ProcessId> {
        self.dropped.get(&receiver).copied()
    }

    pub fn delivers(&self, from: ProcessId, to: ProcessId) -> bool {
        self.dropped.get(&to) != Some(&from)
    }

    /// If every drop names the same sender, the equivalent fail-to-send fault.
    pub fn as_send_fault(&self) -> Option<RoundFault> {
        let mut senders = self.dropped.values();
        match senders.next() {
            None => Some(RoundFault::none()),
            Some(&s) if senders.all(|&t| t == s) => Some(RoundFault::new(s, self.dropped.keys().copied())),
            Some(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FaultShapeError {
    #[error("process {0} cannot drop its own message")]
    SelfDrop(ProcessId),
    #[error("receiver {0} listed twice")]
    DuplicateReceiver(ProcessId),
    #[error("process {pid} out of range for n = {n}")]
    OutOfRange { pid: ProcessId, n: usize },
    #[error("multiple faulty senders")]
    MultipleSenders,
}
