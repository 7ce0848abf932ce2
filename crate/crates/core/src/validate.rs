//! Trace replay and validation, and the consensus outcome relation.

use std::collections::{BTreeMap, BTreeSet};

use crate::async_engine::{step_async, AsyncSystemState};
use crate::error::EngineError;
use crate::protocol::{AnyProtocol, AsyncProtocol, RoundProtocol};
use crate::protocols::{resolve, RegistryError};
use crate::sync_engine::{initial_configuration, new_outputs, step, SyncFault};
use crate::trace::{ExecutionTrace, Model, StepEvent, TraceStep};
use crate::types::{Bit, FaultShapeError, ProcessId, ReceiveFault, RoundFault};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConsensusViolation {
    #[error("agreement violated: both 0 and 1 were output")]
    Agreement,
    #[error("validity violated: all inputs are {input} but {output} was output")]
    Validity { input: Bit, output: Bit },
}

/// The consensus relation on sets of inputs and outputs: no two distinct
/// outputs, and unanimous inputs admit only that value as output.
pub fn check_colorless_outcome(inputs: &BTreeSet<Bit>, outputs: &BTreeSet<Bit>) -> Result<(), ConsensusViolation> {
    if outputs.len() > 1 {
        return Err(ConsensusViolation::Agreement);
    }
    if let ([input], Some(&output)) = (inputs.iter().copied().collect::<Vec<_>>().as_slice(), outputs.iter().next()) {
        if output != *input {
            return Err(ConsensusViolation::Validity { input: *input, output });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceIssue {
    /// The recorded fault does not fit the declared model.
    Shape {
        step: usize,
        error: FaultShapeError,
    },
    RoundMismatch {
        step: usize,
        expected: u64,
        recorded: u64,
    },
    OutputDivergence {
        step: usize,
        recorded: BTreeMap<ProcessId, Bit>,
        replayed: BTreeMap<ProcessId, Bit>,
    },
    WriteOnce {
        step: usize,
        pid: ProcessId,
    },
    Engine {
        step: usize,
        error: EngineError,
    },
    StepModel {
        step: usize,
        found: Model,
    },
}

impl std::fmt::Display for TraceIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceIssue::Shape { step, error } => write!(f, "step {step}: {error}"),
            TraceIssue::RoundMismatch { step, expected, recorded } => {
                write!(f, "step {step}: round {recorded} recorded, {expected} expected")
            }
            TraceIssue::OutputDivergence { step, recorded, replayed } => {
                write!(f, "step {step}: outputs {recorded:?} recorded, {replayed:?} on replay")
            }
            TraceIssue::WriteOnce { step, pid } => write!(f, "step {step}: process {pid} rewrote its output"),
            TraceIssue::Engine { step, error } => write!(f, "step {step}: {error}"),
            TraceIssue::StepModel { step, found } => write!(f, "step {step}: {found} record in trace of another model"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    /// Issues in step order. Steps are numbered from 1.
    pub issues: Vec<TraceIssue>,
    /// The trace as re-executed, up to the first step that could not be
    /// replayed.
    pub replayed: ExecutionTrace,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error(transparent)]
    Protocol(#[from] RegistryError),
    #[error("protocol {protocol:?} cannot run in the {model} model")]
    KindMismatch { protocol: String, model: Model },
}

/// Replays `trace` under its named protocol and reports every divergence.
pub fn validate_trace(trace: &ExecutionTrace) -> Result<ValidationReport, ValidationError> {
    let protocol = resolve(&trace.header.protocol)?;
    let mismatch = || ValidationError::KindMismatch {
        protocol: trace.header.protocol.clone(),
        model: trace.model(),
    };
    Ok(match (trace.model(), &protocol) {
        (Model::Fts, AnyProtocol::Round(p)) => replay_sync::<RoundFault>(trace, p.as_ref()),
        (Model::Ftr, AnyProtocol::Round(p)) => replay_sync::<ReceiveFault>(trace, p.as_ref()),
        (Model::Flp, AnyProtocol::Async(p)) => replay_async(trace, p.as_ref()),
        _ => return Err(mismatch()),
    })
}

/// Replays a trace against an explicit protocol rather than a registry id.
pub fn validate_with_round_protocol(trace: &ExecutionTrace, protocol: &dyn RoundProtocol) -> Result<ValidationReport, ValidationError> {
    match trace.model() {
        Model::Fts => Ok(replay_sync::<RoundFault>(trace, protocol)),
        Model::Ftr => Ok(replay_sync::<ReceiveFault>(trace, protocol)),
        Model::Flp => Err(ValidationError::KindMismatch {
            protocol: protocol.id(),
            model: Model::Flp,
        }),
    }
}

fn check_outputs(issues: &mut Vec<TraceIssue>, step: usize, recorded: &TraceStep, replayed: &BTreeMap<ProcessId, Bit>) {
    if &recorded.outputs != replayed {
        issues.push(TraceIssue::OutputDivergence {
            step,
            recorded: recorded.outputs.clone(),
            replayed: replayed.clone(),
        });
    }
}

fn engine_issue(step: usize, error: EngineError) -> TraceIssue {
    match error {
        EngineError::WriteOnce { pid, .. } => TraceIssue::WriteOnce { step, pid },
        EngineError::FaultShape(error) => TraceIssue::Shape { step, error },
        error => TraceIssue::Engine { step, error },
    }
}

fn replay_sync<F: SyncFault>(trace: &ExecutionTrace, protocol: &dyn RoundProtocol) -> ValidationReport {
    let n = trace.n();
    let mut issues = Vec::new();
    let mut replayed = ExecutionTrace::new(trace.model(), trace.header.protocol.clone(), trace.header.inputs.clone());
    let mut config = initial_configuration(protocol, &trace.header.inputs);
    for (i, recorded) in trace.steps.iter().enumerate() {
        let step_no = i + 1;
        if recorded.event.model() != F::MODEL {
            issues.push(TraceIssue::StepModel {
                step: step_no,
                found: recorded.event.model(),
            });
            break;
        }
        let fault = match F::from_record(&recorded.event, n) {
            Ok(f) => f,
            Err(error) => {
                issues.push(TraceIssue::Shape { step: step_no, error });
                break;
            }
        };
        if let Some(r) = recorded.event.round() {
            if r != config.round {
                issues.push(TraceIssue::RoundMismatch {
                    step: step_no,
                    expected: config.round,
                    recorded: r,
                });
            }
        }
        let next = match step(&config, protocol, &fault) {
            Ok(c) => c,
            Err(e) => {
                issues.push(engine_issue(step_no, e));
                break;
            }
        };
        let outputs = new_outputs(&config, &next);
        check_outputs(&mut issues, step_no, recorded, &outputs);
        replayed.steps.push(TraceStep {
            event: fault.record(config.round),
            outputs,
        });
        config = next;
    }
    ValidationReport { issues, replayed }
}

fn replay_async(trace: &ExecutionTrace, protocol: &dyn AsyncProtocol) -> ValidationReport {
    let mut issues = Vec::new();
    let mut replayed = ExecutionTrace::new(Model::Flp, trace.header.protocol.clone(), trace.header.inputs.clone());
    let mut state = AsyncSystemState::initial(protocol, &trace.header.inputs);
    for (i, recorded) in trace.steps.iter().enumerate() {
        let step_no = i + 1;
        let StepEvent::Flp(event) = recorded.event else {
            issues.push(TraceIssue::StepModel {
                step: step_no,
                found: recorded.event.model(),
            });
            break;
        };
        let next = match step_async(&state, protocol, event) {
            Ok(s) => s,
            Err(e) => {
                issues.push(engine_issue(step_no, e));
                break;
            }
        };
        let before = state.outputs();
        let outputs: BTreeMap<_, _> = next.outputs().into_iter().filter(|(p, _)| !before.contains_key(p)).collect();
        check_outputs(&mut issues, step_no, recorded, &outputs);
        replayed.steps.push(TraceStep {
            event: StepEvent::Flp(event),
            outputs,
        });
        state = next;
    }
    ValidationReport { issues, replayed }
}
