use crate::protocol::ProtocolError;
use crate::trace::Model;
use crate::types::{Bit, FaultShapeError, ProcessId};

/// Failures raised while executing a protocol under one of the engines.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("round {round}, process {pid}: {source}")]
    Protocol {
        round: u64,
        pid: ProcessId,
        #[source]
        source: ProtocolError,
    },
    #[error("round {round}, process {pid}: output rewritten from {old} to {new}")]
    WriteOnce { round: u64, pid: ProcessId, old: Bit, new: Bit },
    #[error("process {0} sent a message to itself")]
    SelfSend(ProcessId),
    #[error("message {id} is not in flight for process {pid}")]
    NoSuchMessage { id: u64, pid: ProcessId },
    #[error("process {0} has crashed and cannot take steps")]
    Crashed(ProcessId),
    #[error("process {second} cannot crash: process {first} already crashed")]
    SecondCrash { first: ProcessId, second: ProcessId },
    #[error("invalid fault: {0}")]
    FaultShape(#[from] FaultShapeError),
    #[error("{expected} inputs expected, {got} given")]
    InputCount { expected: usize, got: usize },
    #[error("operation not available for the {0} model")]
    UnsupportedModel(Model),
    #[error("n = {0} is below the minimum of 3 processes")]
    TooFewProcesses(usize),
}
