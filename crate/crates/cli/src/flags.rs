//! Parsing of shared flags into engine objects, and the execution loops
//! shared by `run` and `simulate`.

use std::path::Path;

use omission_core::async_engine::{make_scheduler, run_async, AsyncRun, CrashPlan, SchedulerKind};
use omission_core::protocols::{resolve, RegistryError};
use omission_core::rng::stream;
use omission_core::sync_engine::{
    initial_configuration, new_outputs, step, AdversaryPolicy, NoFaults, RandomReceiveFaults, RandomSendFaults, Scripted, Silent, SyncFault,
};
use omission_core::trace::{parse_step_script, TraceStep};
use omission_core::{
    AnyProtocol, AsyncProtocol, Bit, Configuration, EngineError, ExecutionTrace, Model, ProcessId, ReceiveFault, RoundFault, RoundProtocol,
};
use rand::Rng;
use serde_json::{json, Map, Value};

use crate::args::Exec;
use crate::exit::{Code, Failure};

pub fn protocol(id: &str) -> Result<AnyProtocol, Failure> {
    resolve(id).map_err(|e| match e {
        RegistryError::Unknown(_) | RegistryError::KindMismatch { .. } => Failure::new(Code::UnknownProtocol, e),
    })
}

pub fn require_n(n: usize) -> Result<(), Failure> {
    if n < 3 {
        return Err(Failure::usage(format!("n = {n} is below the minimum of 3 processes")));
    }
    Ok(())
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::usage(format!("{what} needs --seed")))
}

/// The given input vector, or one drawn from the seed's `inputs` stream.
pub fn inputs(exec: &Exec) -> Result<Vec<Bit>, Failure> {
    let inputs = match &exec.inputs {
        Some(s) => omission_core::parse_bits(s).map_err(Failure::usage)?,
        None => {
            let mut rng = stream(require_seed(exec.seed, "drawing inputs")?, "inputs", 0);
            (0..exec.n).map(|_| Bit::from_bool(rng.gen_bool(0.5))).collect()
        }
    };
    if inputs.len() != exec.n {
        return Err(Failure::usage(format!("{} inputs given for n = {}", inputs.len(), exec.n)));
    }
    Ok(inputs)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

/// Step records of a script file: either bare step lines or a full trace.
fn script_steps(model: Model, path: &Path) -> Result<Vec<TraceStep>, Failure> {
    let text = read(path)?;
    parse_step_script(model, &text)
        .or_else(|_| ExecutionTrace::from_jsonl(&text).map(|t| t.steps))
        .map_err(|e| Failure::new(Code::Trace, format!("{}: {e}", path.display())))
}

fn parse_pid(s: &str, n: usize) -> Result<ProcessId, Failure> {
    match s.parse::<usize>() {
        Ok(p) if p < n => Ok(ProcessId(p)),
        _ => Err(Failure::usage(format!("invalid process id {s:?} for n = {n}"))),
    }
}

/// Fault kinds with a seeded random policy.
pub trait CliFault: SyncFault + 'static
where
    Silent: AdversaryPolicy<Self>,
{
    fn random(n: usize, seed: u64, no_silence: bool) -> Box<dyn AdversaryPolicy<Self>>;
}

impl CliFault for RoundFault {
    fn random(n: usize, seed: u64, _: bool) -> Box<dyn AdversaryPolicy<Self>> {
        Box::new(RandomSendFaults::new(n, stream(seed, "adversary", 0)))
    }
}

impl CliFault for ReceiveFault {
    fn random(n: usize, seed: u64, no_silence: bool) -> Box<dyn AdversaryPolicy<Self>> {
        Box::new(RandomReceiveFaults::new(n, stream(seed, "adversary", 0), !no_silence))
    }
}

pub fn sync_policy<F: CliFault>(exec: &Exec) -> Result<Box<dyn AdversaryPolicy<F>>, Failure>
where
    Silent: AdversaryPolicy<F>,
{
    let spec = exec.adversary.as_deref().unwrap_or("none");
    let n = exec.n;
    Ok(match spec.split_once(':') {
        None if spec == "none" => Box::new(NoFaults),
        None if spec == "random" => F::random(n, require_seed(exec.seed, "--adversary random")?, false),
        None if spec == "random-no-silence" && F::MODEL == Model::Ftr => {
            F::random(n, require_seed(exec.seed, "--adversary random-no-silence")?, true)
        }
        Some(("silent", p)) => Box::new(Silent { pid: parse_pid(p, n)?, n }),
        Some(("script", path)) => {
            let steps = script_steps(F::MODEL, Path::new(path))?;
            Box::new(Scripted::<F>::from_steps(&steps, n).map_err(|e| Failure::new(Code::Trace, e))?)
        }
        _ => return Err(Failure::usage(format!("unknown {} adversary {spec:?}", F::MODEL))),
    })
}

pub fn crash_plan(exec: &Exec) -> Result<Option<CrashPlan>, Failure> {
    let Some(spec) = &exec.crash else { return Ok(None) };
    let (p, at) = spec
        .split_once('@')
        .ok_or_else(|| Failure::usage(format!("--crash expects P@STEP, got {spec:?}")))?;
    let at_event = at.parse().map_err(|_| Failure::usage(format!("invalid crash step {at:?}")))?;
    Ok(Some(CrashPlan {
        pid: parse_pid(p, exec.n)?,
        at_event,
    }))
}

pub fn scheduler_kind(exec: &Exec) -> Result<SchedulerKind, Failure> {
    let spec = exec.adversary.as_deref().unwrap_or("round-robin");
    Ok(match spec.split_once(':') {
        None if spec == "round-robin" => SchedulerKind::RoundRobin,
        None if spec == "random" => SchedulerKind::SeededRandomFair {
            seed: require_seed(exec.seed, "--adversary random")?,
            window: exec.window,
        },
        Some(("script", path)) => {
            let steps = script_steps(Model::Flp, Path::new(path))?;
            let events = steps
                .into_iter()
                .map(|s| match s.event {
                    omission_core::StepEvent::Flp(ev) => Ok(ev),
                    _ => Err(Failure::new(Code::Trace, "asynchronous script holds a synchronous step")),
                })
                .collect::<Result<_, _>>()?;
            SchedulerKind::Scripted(events)
        }
        _ => return Err(Failure::usage(format!("unknown flp scheduler {spec:?}"))),
    })
}

/// A synchronous run that keeps the trace when the engine stops on an error.
pub struct SyncRun {
    pub trace: ExecutionTrace,
    pub final_config: Configuration,
    pub error: Option<EngineError>,
}

pub fn run_sync<F: SyncFault>(
    protocol: &dyn RoundProtocol,
    inputs: &[Bit],
    policy: &mut dyn AdversaryPolicy<F>,
    horizon: u64,
    mut observe: impl FnMut(&Configuration),
) -> SyncRun {
    let mut config = initial_configuration(protocol, inputs);
    let mut trace = ExecutionTrace::new(F::MODEL, protocol.id(), inputs.to_vec());
    let mut error = None;
    for _ in 0..horizon {
        let fault = policy.next_fault(config.round, &trace);
        match step(&config, protocol, &fault) {
            Ok(next) => {
                trace.steps.push(TraceStep {
                    event: fault.record(config.round),
                    outputs: new_outputs(&config, &next),
                });
                observe(&next);
                config = next;
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    SyncRun {
        trace,
        final_config: config,
        error,
    }
}

pub fn run_flp(protocol: &dyn AsyncProtocol, inputs: &[Bit], exec: &Exec, horizon: u64) -> Result<AsyncRun, Failure> {
    let kind = scheduler_kind(exec)?;
    let window = match kind {
        SchedulerKind::SeededRandomFair { window, .. } => Some(window),
        _ => None,
    };
    let mut scheduler = make_scheduler(kind, crash_plan(exec)?).map_err(Failure::usage)?;
    run_async(inputs, protocol, scheduler.as_mut(), horizon, window).map_err(|e| Failure::new(Code::Violation, e))
}

pub fn outputs_json(outputs: &std::collections::BTreeMap<ProcessId, Bit>) -> Value {
    let map: Map<String, Value> = outputs.iter().map(|(p, b)| (p.0.to_string(), json!(b.as_u8()))).collect();
    Value::Object(map)
}

pub fn fault_json(f: &RoundFault) -> Value {
    json!({"sender": f.sender().0, "victims": f.victims().iter().map(|p| p.0).collect::<Vec<_>>()})
}
