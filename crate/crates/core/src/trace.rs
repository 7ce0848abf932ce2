//! Execution traces and their JSON Lines encoding.
//!
//! Line 1 is a header `{"model","n","protocol","inputs"}`; every further
//! line is one step. Fail-to-send steps are
//! `{"round","sender","victims","outputs"}`, fail-to-receive steps
//! `{"round","dropped","outputs"}`, and asynchronous steps
//! `{"event":"step","pid","deliver","crash","outputs"}`. Keys are emitted in
//! that order, maps and arrays ascending, so encoding is canonical.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::{Bit, FaultShapeError, ProcessId, ReceiveFault, RoundFault};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Synchronous rounds, one sender per round loses messages.
    Fts,
    /// Synchronous rounds, every receiver may miss one message.
    Ftr,
    /// Asynchronous message passing with at most one crash.
    Flp,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Fts => "fts",
            Model::Ftr => "ftr",
            Model::Flp => "flp",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Model, String> {
        match s {
            "fts" => Ok(Model::Fts),
            "ftr" => Ok(Model::Ftr),
            "flp" => Ok(Model::Flp),
            other => Err(format!("unknown model {other:?} (expected fts, ftr or flp)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub model: Model,
    pub n: usize,
    pub protocol: String,
    pub inputs: Vec<Bit>,
}

/// One scheduler decision in the asynchronous model. With `crash` set the
/// process fail-stops instead of stepping.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AsyncEvent {
    pub pid: ProcessId,
    pub deliver: Option<u64>,
    pub crash: bool,
}

impl AsyncEvent {
    pub fn step(pid: ProcessId, deliver: Option<u64>) -> Self {
        AsyncEvent {
            pid,
            deliver,
            crash: false,
        }
    }

    pub fn crash(pid: ProcessId) -> Self {
        AsyncEvent {
            pid,
            deliver: None,
            crash: true,
        }
    }
}

/// The `sender` field of a fail-to-send record. Engines always write a single
/// id; a list is accepted on input so that malformed multi-sender records can
/// be reported rather than rejected at parse time.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SenderField {
    One(ProcessId),
    Many(Vec<ProcessId>),
}

/// A recorded step, kept in wire form so traces can carry (and validation can
/// report) faults that violate the model's shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepEvent {
    Fts {
        round: u64,
        sender: SenderField,
        victims: Vec<ProcessId>,
    },
    Ftr {
        round: u64,
        dropped: BTreeMap<ProcessId, ProcessId>,
    },
    Flp(AsyncEvent),
}

impl StepEvent {
    pub fn from_send_fault(round: u64, fault: &RoundFault) -> Self {
        StepEvent::Fts {
            round,
            sender: SenderField::One(fault.sender()),
            victims: fault.victims().iter().copied().collect(),
        }
    }

    pub fn from_receive_fault(round: u64, fault: &ReceiveFault) -> Self {
        StepEvent::Ftr {
            round,
            dropped: fault.dropped().clone(),
        }
    }

    pub fn model(&self) -> Model {
        match self {
            StepEvent::Fts { .. } => Model::Fts,
            StepEvent::Ftr { .. } => Model::Ftr,
            StepEvent::Flp(_) => Model::Flp,
        }
    }

    pub fn round(&self) -> Option<u64> {
        match self {
            StepEvent::Fts { round, .. } | StepEvent::Ftr { round, .. } => Some(*round),
            StepEvent::Flp(_) => None,
        }
    }

    /// Interprets a fail-to-send record against an `n`-process system.
    pub fn to_send_fault(&self, n: usize) -> Result<RoundFault, FaultShapeError> {
        let StepEvent::Fts { sender, victims, .. } = self else {
            return Err(FaultShapeError::MultipleSenders);
        };
        let sender = match sender {
            SenderField::One(p) => *p,
            SenderField::Many(ps) => {
                let mut distinct = ps.clone();
                distinct.sort();
                distinct.dedup();
                match distinct.as_slice() {
                    [p] => *p,
                    _ => return Err(FaultShapeError::MultipleSenders),
                }
            }
        };
        for &pid in std::iter::once(&sender).chain(victims) {
            check_range(pid, n)?;
        }
        Ok(RoundFault::new(sender, victims.iter().copied()))
    }

    pub fn to_receive_fault(&self, n: usize) -> Result<ReceiveFault, FaultShapeError> {
        let StepEvent::Ftr { dropped, .. } = self else {
            return Err(FaultShapeError::MultipleSenders);
        };
        for (&r, &s) in dropped {
            check_range(r, n)?;
            check_range(s, n)?;
        }
        ReceiveFault::new(dropped.iter().map(|(&r, &s)| (r, s)))
    }
}

fn check_range(pid: ProcessId, n: usize) -> Result<(), FaultShapeError> {
    if pid.0 < n {
        Ok(())
    } else {
        Err(FaultShapeError::OutOfRange { pid, n })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub event: StepEvent,
    /// Outputs written during this step.
    pub outputs: BTreeMap<ProcessId, Bit>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl ExecutionTrace {
    pub fn new(model: Model, protocol: String, inputs: Vec<Bit>) -> Self {
        ExecutionTrace {
            header: TraceHeader {
                model,
                n: inputs.len(),
                protocol,
                inputs,
            },
            steps: Vec::new(),
        }
    }

    pub fn model(&self) -> Model {
        self.header.model
    }

    pub fn n(&self) -> usize {
        self.header.n
    }

    /// Every output written anywhere in the trace.
    pub fn outputs(&self) -> BTreeMap<ProcessId, Bit> {
        self.steps.iter().flat_map(|s| s.outputs.iter().map(|(&p, &b)| (p, b))).collect()
    }

    pub fn output_count(&self) -> usize {
        self.steps.iter().map(|s| s.outputs.len()).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for step in &self.steps {
            out.push_str(&step_to_json(step));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| TraceError::Parse {
            line: 1,
            reason: e.to_string(),
        })?;
        if header.inputs.len() != header.n {
            return Err(TraceError::Parse {
                line: 1,
                reason: format!("{} inputs for n = {}", header.inputs.len(), header.n),
            });
        }
        let steps = lines
            .map(|(i, l)| step_from_json(header.model, l).map_err(|reason| TraceError::Parse { line: i + 1, reason }))
            .collect::<Result<_, _>>()?;
        Ok(ExecutionTrace { header, steps })
    }
}

/// Parses a JSONL file of step records (no header) for use as a scripted
/// adversary or scheduler.
pub fn parse_step_script(model: Model, text: &str) -> Result<Vec<TraceStep>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| step_from_json(model, l).map_err(|reason| TraceError::Parse { line: i + 1, reason }))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FtsLine {
    round: u64,
    sender: SenderField,
    victims: Vec<ProcessId>,
    outputs: BTreeMap<ProcessId, Bit>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FtrLine {
    round: u64,
    dropped: BTreeMap<ProcessId, ProcessId>,
    outputs: BTreeMap<ProcessId, Bit>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlpLine {
    event: String,
    pid: ProcessId,
    deliver: Option<u64>,
    crash: bool,
    outputs: BTreeMap<ProcessId, Bit>,
}

fn step_to_json(step: &TraceStep) -> String {
    let outputs = step.outputs.clone();
    let res = match &step.event {
        StepEvent::Fts { round, sender, victims } => serde_json::to_string(&FtsLine {
            round: *round,
            sender: sender.clone(),
            victims: victims.clone(),
            outputs,
        }),
        StepEvent::Ftr { round, dropped } => serde_json::to_string(&FtrLine {
            round: *round,
            dropped: dropped.clone(),
            outputs,
        }),
        StepEvent::Flp(ev) => serde_json::to_string(&FlpLine {
            event: "step".into(),
            pid: ev.pid,
            deliver: ev.deliver,
            crash: ev.crash,
            outputs,
        }),
    };
    res.expect("step serializes")
}

fn step_from_json(model: Model, line: &str) -> Result<TraceStep, String> {
    let err = |e: serde_json::Error| e.to_string();
    Ok(match model {
        Model::Fts => {
            let l: FtsLine = serde_json::from_str(line).map_err(err)?;
            TraceStep {
                event: StepEvent::Fts {
                    round: l.round,
                    sender: l.sender,
                    victims: l.victims,
                },
                outputs: l.outputs,
            }
        }
        Model::Ftr => {
            let l: FtrLine = serde_json::from_str(line).map_err(err)?;
            TraceStep {
                event: StepEvent::Ftr {
                    round: l.round,
                    dropped: l.dropped,
                },
                outputs: l.outputs,
            }
        }
        Model::Flp => {
            let l: FlpLine = serde_json::from_str(line).map_err(err)?;
            if l.event != "step" {
                return Err(format!("unknown event {:?}", l.event));
            }
            TraceStep {
                event: StepEvent::Flp(AsyncEvent {
                    pid: l.pid,
                    deliver: l.deliver,
                    crash: l.crash,
                }),
                outputs: l.outputs,
            }
        }
    })
}
