//! Deterministic laboratory for round-based and asynchronous message-passing
//! models with omission and crash faults.
//!
//! The centerpiece is [`nondecider`], an omniscient fail-to-send adversary
//! that, for any protocol keeping agreement and validity and deciding in
//! failure-free and 1-silent runs, builds an arbitrarily long execution in
//! which nobody decides.
//!
//! Engines: [`sync_engine`] runs the fail-to-send (`fts`) and
//! fail-to-receive (`ftr`) lockstep models, [`async_engine`] the
//! asynchronous model with at most one crash (`flp`). [`simulations`] holds
//! the wrappers that run a protocol of one model on the engine of another.

pub mod async_engine;
pub mod check;
pub mod error;
pub mod nondecider;
pub mod protocol;
pub mod protocols;
pub mod rng;
pub mod simulations;
pub mod sync_engine;
pub mod trace;
pub mod types;
pub mod validate;

pub use error::EngineError;
pub use protocol::{AnyProtocol, AsyncProtocol, ProcessCtx, ProtocolError, RoundProtocol};
pub use trace::{ExecutionTrace, Model, StepEvent, TraceStep};
pub use types::{parse_bits, Bit, Configuration, LocalState, ProcessId, ReceiveFault, RoundFault};
