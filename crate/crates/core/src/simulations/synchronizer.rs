use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::async_engine::AsyncSystemState;
use crate::error::EngineError;
use crate::protocol::{decode_payload, decode_state, encode, AsyncProtocol, AsyncStep, ProcessCtx, ProtocolError, RoundProtocol};
use crate::sync_engine::{initial_configuration, new_outputs, step_ftr};
use crate::trace::{ExecutionTrace, Model, StepEvent, TraceStep};
use crate::types::{Bit, ProcessId, ReceiveFault};
use crate::validate::{validate_with_round_protocol, ValidationError, ValidationReport};

/// Runs a fail-to-receive protocol on the asynchronous engine.
///
/// A process in round `r` buffers messages tagged `r' >= r`, drops older
/// ones, and once it holds `n - 2` round-`r` messages feeds all of them to
/// the inner transition and enters round `r + 1`, broadcasting the inner
/// round-`r + 1` message.
pub struct Synchronizer {
    inner: Arc<dyn RoundProtocol>,
}

/// One completed simulated round, kept for the projection check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub heard: Vec<ProcessId>,
    pub state_after: Vec<u8>,
    pub output: Option<Bit>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynchronizerState {
    pub round: u64,
    pub inner: Vec<u8>,
    pub started: bool,
    pub buffer: BTreeMap<(u64, ProcessId), Vec<u8>>,
    pub log: Vec<RoundLog>,
}

impl SynchronizerState {
    pub fn decided_at(&self) -> Option<u64> {
        self.log.iter().position(|l| l.output.is_some()).map(|i| i as u64 + 1)
    }
}

impl Synchronizer {
    pub fn new(inner: Arc<dyn RoundProtocol>) -> Self {
        Synchronizer { inner }
    }

    pub fn inner(&self) -> &Arc<dyn RoundProtocol> {
        &self.inner
    }

    pub fn decode(bytes: &[u8]) -> Result<SynchronizerState, ProtocolError> {
        decode_state(bytes)
    }

    fn broadcast(&self, ctx: ProcessCtx, st: &SynchronizerState, sends: &mut Vec<(ProcessId, Vec<u8>)>) -> Result<(), ProtocolError> {
        let payload = self.inner.message(ctx, &st.inner, st.round)?;
        let tagged = encode(&(st.round, payload));
        sends.extend(ctx.others().map(|q| (q, tagged.clone())));
        Ok(())
    }
}

impl AsyncProtocol for Synchronizer {
    fn id(&self) -> String {
        format!("synchronizer({})", self.inner.id())
    }

    fn init(&self, ctx: ProcessCtx, input: Bit) -> Vec<u8> {
        encode(&SynchronizerState {
            round: 1,
            inner: self.inner.init(ctx, input),
            started: false,
            buffer: BTreeMap::new(),
            log: Vec::new(),
        })
    }

    fn step(&self, ctx: ProcessCtx, internal: &[u8], incoming: Option<(ProcessId, &[u8])>) -> Result<AsyncStep, ProtocolError> {
        if ctx.n < 3 {
            return Err(ProtocolError::Unsupported(format!("synchronizer needs n >= 3, got {}", ctx.n)));
        }
        let mut st = Self::decode(internal)?;
        let mut sends = Vec::new();
        let mut output = None;
        if !st.started {
            st.started = true;
            self.broadcast(ctx, &st, &mut sends)?;
        }
        if let Some((from, bytes)) = incoming {
            let (r, payload): (u64, Vec<u8>) = decode_payload(from, bytes)?;
            if r >= st.round {
                st.buffer.insert((r, from), payload);
            }
        }
        loop {
            let r = st.round;
            let current: Vec<ProcessId> = st
                .buffer
                .range((r, ProcessId(0))..(r + 1, ProcessId(0)))
                .map(|(&(_, p), _)| p)
                .collect();
            if current.len() < ctx.n - 2 {
                break;
            }
            let payloads: Vec<(ProcessId, Vec<u8>)> = current
                .iter()
                .map(|&p| (p, st.buffer.remove(&(r, p)).expect("listed above")))
                .collect();
            let inbox: Vec<(ProcessId, &[u8])> = payloads.iter().map(|(p, m)| (*p, m.as_slice())).collect();
            let t = self.inner.transition(ctx, &st.inner, r, &inbox)?;
            output = output.or(t.output);
            st.log.push(RoundLog {
                heard: current,
                state_after: t.internal.clone(),
                output: t.output,
            });
            st.inner = t.internal;
            st.round += 1;
            self.broadcast(ctx, &st, &mut sends)?;
        }
        Ok(AsyncStep {
            internal: encode(&st),
            sends,
            output,
        })
    }
}

/// The fail-to-receive execution the synchronized processes carried out.
#[derive(Clone, Debug)]
pub struct Projection {
    /// Fail-to-receive trace of the inner protocol over all `n` processes.
    /// Rows of the crashed process after it stopped completing rounds are
    /// hypothetical: it drops nothing and its outputs come from replay.
    pub trace: ExecutionTrace,
    pub crashed: Option<ProcessId>,
    /// Simulated rounds completed by every surviving process.
    pub rounds: u64,
    /// (round, process) pairs whose real state differs from the replay.
    pub state_mismatches: Vec<(u64, ProcessId)>,
    pub validation: ValidationReport,
}

impl Projection {
    pub fn is_faithful(&self) -> bool {
        self.state_mismatches.is_empty() && self.validation.is_valid()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProjectionError {
    #[error("process {pid}: {source}")]
    State { pid: ProcessId, source: ProtocolError },
    #[error("process {pid} heard only {heard} of {others} peers in simulated round {round}")]
    TooFewHeard {
        pid: ProcessId,
        round: u64,
        heard: usize,
        others: usize,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

/// Projects a synchronized run onto the fail-to-receive model and checks it
/// by replaying the inner protocol.
pub fn project(state: &AsyncSystemState, inner: &dyn RoundProtocol) -> Result<Projection, ProjectionError> {
    let n = state.n();
    let states = state
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| Synchronizer::decode(&s.internal).map_err(|source| ProjectionError::State { pid: ProcessId(i), source }))
        .collect::<Result<Vec<_>, _>>()?;
    let rounds = state.live().map(|p| states[p.0].log.len() as u64).min().unwrap_or(0);
    let inputs: Vec<Bit> = state.states.iter().map(|s| s.input).collect();

    let mut trace = ExecutionTrace::new(Model::Ftr, inner.id(), inputs.clone());
    let mut config = initial_configuration(inner, &inputs);
    let mut state_mismatches = Vec::new();
    for r in 1..=rounds {
        let idx = (r - 1) as usize;
        let real = |q: ProcessId| states[q.0].log.get(idx);
        let mut dropped = Vec::new();
        for q in ProcessId::all(n) {
            let Some(log) = real(q) else { continue };
            let heard: BTreeSet<ProcessId> = log.heard.iter().copied().collect();
            let missing: Vec<ProcessId> = ProcessId::all(n).filter(|&p| p != q && !heard.contains(&p)).collect();
            match missing.as_slice() {
                [] => {}
                [p] => dropped.push((q, *p)),
                _ => {
                    return Err(ProjectionError::TooFewHeard {
                        pid: q,
                        round: r,
                        heard: heard.len(),
                        others: n - 1,
                    })
                }
            }
        }
        let fault = ReceiveFault::new(dropped).map_err(EngineError::from)?;
        let next = step_ftr(&config, inner, &fault)?;
        let mut outputs = new_outputs(&config, &next);
        for q in ProcessId::all(n) {
            let Some(log) = real(q) else { continue };
            if next.states[q.0].internal != log.state_after {
                state_mismatches.push((r, q));
            }
            let first = states[q.0].decided_at() == Some(r);
            match (first, log.output) {
                (true, Some(b)) => {
                    outputs.insert(q, b);
                }
                _ => {
                    outputs.remove(&q);
                }
            }
        }
        trace.steps.push(TraceStep {
            event: StepEvent::from_receive_fault(r, &fault),
            outputs,
        });
        config = next;
    }
    let validation = validate_with_round_protocol(&trace, inner)?;
    Ok(Projection {
        trace,
        crashed: state.crashed,
        rounds,
        state_mismatches,
        validation,
    })
}

/// Lowest simulated round reached by a live process.
pub fn min_live_round(state: &AsyncSystemState) -> Result<u64, ProtocolError> {
    state
        .live()
        .map(|p| Synchronizer::decode(&state.states[p.0].internal).map(|s| s.round))
        .try_fold(u64::MAX, |acc, r| r.map(|r| acc.min(r)))
}
