//! Executor for the asynchronous model: atomic receive/update/send steps in a
//! scheduler-chosen order, a pool of in-flight messages, and at most one
//! crash-stop failure.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;
use crate::protocol::{AsyncProtocol, ProcessCtx};
use crate::sync_engine::write_output;
use crate::trace::{AsyncEvent, ExecutionTrace, Model, StepEvent, TraceStep};
use crate::types::{Bit, LocalState, ProcessId};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InFlight {
    pub from: ProcessId,
    pub to: ProcessId,
    pub payload: Vec<u8>,
    /// Index of the event that sent the message.
    pub sent_at: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AsyncSystemState {
    pub states: Vec<LocalState>,
    /// Keyed by send index, which doubles as the message id.
    pub in_flight: BTreeMap<u64, InFlight>,
    pub crashed: Option<ProcessId>,
    pub next_id: u64,
    /// Number of events applied so far.
    pub events: u64,
}

impl AsyncSystemState {
    pub fn initial(protocol: &dyn AsyncProtocol, inputs: &[Bit]) -> Self {
        let n = inputs.len();
        AsyncSystemState {
            states: inputs
                .iter()
                .enumerate()
                .map(|(i, &input)| LocalState {
                    input,
                    internal: protocol.init(ProcessCtx::new(ProcessId(i), n), input),
                    output: None,
                })
                .collect(),
            in_flight: BTreeMap::new(),
            crashed: None,
            next_id: 0,
            events: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn is_live(&self, pid: ProcessId) -> bool {
        self.crashed != Some(pid)
    }

    pub fn live(&self) -> impl Iterator<Item = ProcessId> + '_ {
        ProcessId::all(self.n()).filter(|&p| self.is_live(p))
    }

    /// Ids of in-flight messages addressed to `pid`, oldest first.
    pub fn pending_for(&self, pid: ProcessId) -> impl Iterator<Item = (u64, &InFlight)> + '_ {
        self.in_flight.iter().filter(move |(_, m)| m.to == pid).map(|(&id, m)| (id, m))
    }

    pub fn outputs(&self) -> BTreeMap<ProcessId, Bit> {
        self.states
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.output.map(|b| (ProcessId(i), b)))
            .collect()
    }
}

/// Applies one scheduler event.
pub fn step_async(state: &AsyncSystemState, protocol: &dyn AsyncProtocol, event: AsyncEvent) -> Result<AsyncSystemState, EngineError> {
    let n = state.n();
    let pid = event.pid;
    if pid.0 >= n {
        return Err(crate::types::FaultShapeError::OutOfRange { pid, n }.into());
    }
    if !state.is_live(pid) {
        return Err(EngineError::Crashed(pid));
    }
    let mut next = state.clone();
    next.events += 1;
    if event.crash {
        if let Some(first) = state.crashed {
            return Err(EngineError::SecondCrash { first, second: pid });
        }
        next.crashed = Some(pid);
        return Ok(next);
    }

    let incoming = match event.deliver {
        Some(id) => match next.in_flight.remove(&id) {
            Some(m) if m.to == pid => Some(m),
            _ => return Err(EngineError::NoSuchMessage { id, pid }),
        },
        None => None,
    };
    let local = &state.states[pid.0];
    let out = protocol
        .step(
            ProcessCtx::new(pid, n),
            &local.internal,
            incoming.as_ref().map(|m| (m.from, m.payload.as_slice())),
        )
        .map_err(|source| EngineError::Protocol {
            round: state.events,
            pid,
            source,
        })?;
    for (to, payload) in out.sends {
        if to == pid {
            return Err(EngineError::SelfSend(pid));
        }
        if to.0 >= n {
            return Err(crate::types::FaultShapeError::OutOfRange { pid: to, n }.into());
        }
        next.in_flight.insert(
            next.next_id,
            InFlight {
                from: pid,
                to,
                payload,
                sent_at: state.events,
            },
        );
        next.next_id += 1;
    }
    next.states[pid.0] = LocalState {
        input: local.input,
        internal: out.internal,
        output: write_output(local.output, out.output, state.events, pid)?,
    };
    Ok(next)
}

/// Picks the next event. `None` ends the run.
pub trait Scheduler {
    fn next_event(&mut self, state: &AsyncSystemState) -> Option<AsyncEvent>;
}

/// Optional crash directive: `pid` fail-stops once `at_event` events have run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrashPlan {
    pub pid: ProcessId,
    pub at_event: u64,
}

fn crash_due(plan: Option<CrashPlan>, state: &AsyncSystemState) -> Option<AsyncEvent> {
    let plan = plan?;
    (state.crashed.is_none() && state.events >= plan.at_event).then(|| AsyncEvent::crash(plan.pid))
}

/// Steps live processes in cyclic pid order, each delivering its oldest
/// pending message if it has one.
#[derive(Clone, Debug)]
pub struct RoundRobin {
    next: usize,
    crash: Option<CrashPlan>,
}

impl Scheduler for RoundRobin {
    fn next_event(&mut self, state: &AsyncSystemState) -> Option<AsyncEvent> {
        if let Some(ev) = crash_due(self.crash, state) {
            return Some(ev);
        }
        let n = state.n();
        let pid = (0..n).map(|k| ProcessId((self.next + k) % n)).find(|&p| state.is_live(p))?;
        self.next = (pid.0 + 1) % n;
        Some(AsyncEvent::step(pid, state.pending_for(pid).next().map(|(id, _)| id)))
    }
}

/// Seeded random scheduler with bounded-window fairness.
///
/// Live processes are stepped in random order, each exactly once per epoch,
/// so no live process waits more than `2n - 1` events. A stepped process
/// receives its oldest pending message once that message is `window / 2`
/// events old, otherwise a random pending message with probability 7/8.
/// Messages stay within the window as long as no process is sent more than
/// one message per step it takes.
#[derive(Clone, Debug)]
pub struct RandomFair {
    rng: ChaCha8Rng,
    window: u64,
    crash: Option<CrashPlan>,
    epoch: Vec<ProcessId>,
}

impl Scheduler for RandomFair {
    fn next_event(&mut self, state: &AsyncSystemState) -> Option<AsyncEvent> {
        if let Some(ev) = crash_due(self.crash, state) {
            return Some(ev);
        }
        let pid = loop {
            match self.epoch.pop() {
                Some(p) if state.is_live(p) => break p,
                Some(_) => continue,
                None => {
                    self.epoch = state.live().collect();
                    if self.epoch.is_empty() {
                        return None;
                    }
                    self.epoch.shuffle(&mut self.rng);
                }
            }
        };
        let pending: Vec<(u64, u64)> = state.pending_for(pid).map(|(id, m)| (id, m.sent_at)).collect();
        let deliver = match pending.first() {
            None => None,
            Some(&(oldest, sent_at)) if state.events - sent_at >= self.window / 2 => Some(oldest),
            Some(_) if self.rng.gen_ratio(7, 8) => Some(pending[self.rng.gen_range(0..pending.len())].0),
            Some(_) => None,
        };
        Some(AsyncEvent::step(pid, deliver))
    }
}

/// Replays a fixed event list, then stops.
#[derive(Clone, Debug)]
pub struct ScriptedScheduler {
    events: std::vec::IntoIter<AsyncEvent>,
}

impl ScriptedScheduler {
    pub fn new(events: Vec<AsyncEvent>) -> Self {
        ScriptedScheduler {
            events: events.into_iter(),
        }
    }

    pub fn from_steps(steps: &[TraceStep]) -> Result<Self, SchedulerError> {
        steps
            .iter()
            .enumerate()
            .map(|(i, s)| match s.event {
                StepEvent::Flp(ev) => Ok(ev),
                _ => Err(SchedulerError::MalformedScript(format!(
                    "step {} is not an asynchronous event",
                    i + 1
                ))),
            })
            .collect::<Result<_, _>>()
            .map(ScriptedScheduler::new)
    }
}

impl Scheduler for ScriptedScheduler {
    fn next_event(&mut self, _: &AsyncSystemState) -> Option<AsyncEvent> {
        self.events.next()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SchedulerError {
    #[error("malformed schedule script: {0}")]
    MalformedScript(String),
    #[error("invalid scheduler parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug)]
pub enum SchedulerKind {
    RoundRobin,
    SeededRandomFair { seed: u64, window: u64 },
    Scripted(Vec<AsyncEvent>),
}

/// Builds one of the built-in deterministic schedulers.
pub fn make_scheduler(kind: SchedulerKind, crash: Option<CrashPlan>) -> Result<Box<dyn Scheduler>, SchedulerError> {
    Ok(match kind {
        SchedulerKind::RoundRobin => Box::new(RoundRobin { next: 0, crash }),
        SchedulerKind::SeededRandomFair { seed, window } => {
            if window < 2 {
                return Err(SchedulerError::InvalidParams(format!("window {window} is below 2")));
            }
            Box::new(RandomFair {
                rng: crate::rng::stream(seed, "scheduler", 0),
                window,
                crash,
                epoch: Vec::new(),
            })
        }
        SchedulerKind::Scripted(events) => {
            if crash.is_some() {
                return Err(SchedulerError::InvalidParams("scripted schedules carry their own crashes".into()));
            }
            Box::new(ScriptedScheduler::new(events))
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FairnessViolation {
    /// A live process took no step during events `from..to`.
    Unstepped { pid: ProcessId, from: u64, to: u64 },
    /// A message to a live process waited longer than the window.
    StaleMessage { id: u64, sent_at: u64, delivered_at: Option<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FairnessReport {
    pub window: u64,
    pub violations: Vec<FairnessViolation>,
}

impl FairnessReport {
    pub fn is_fair(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct AsyncRun {
    pub trace: ExecutionTrace,
    pub final_state: AsyncSystemState,
    pub fairness: Option<FairnessReport>,
}

/// Runs at most `horizon` events. With `fairness_window`, also reports every
/// live process left unstepped, and every message left undelivered, for
/// longer than the window.
pub fn run_async(
    inputs: &[Bit],
    protocol: &dyn AsyncProtocol,
    scheduler: &mut dyn Scheduler,
    horizon: u64,
    fairness_window: Option<u64>,
) -> Result<AsyncRun, EngineError> {
    let mut state = AsyncSystemState::initial(protocol, inputs);
    let mut trace = ExecutionTrace::new(Model::Flp, protocol.id(), inputs.to_vec());
    let mut last_step = vec![0u64; state.n()];
    let mut violations = Vec::new();
    for _ in 0..horizon {
        let Some(event) = scheduler.next_event(&state) else { break };
        let now = state.events;
        let sent_at = event.deliver.and_then(|id| state.in_flight.get(&id)).map(|m| m.sent_at);
        let next = step_async(&state, protocol, event)?;
        if let Some(w) = fairness_window {
            if !event.crash {
                if now - last_step[event.pid.0] > w {
                    violations.push(FairnessViolation::Unstepped {
                        pid: event.pid,
                        from: last_step[event.pid.0],
                        to: now,
                    });
                }
                last_step[event.pid.0] = now;
            }
            if let (Some(id), Some(sent_at)) = (event.deliver, sent_at) {
                if now - sent_at > w {
                    violations.push(FairnessViolation::StaleMessage {
                        id,
                        sent_at,
                        delivered_at: Some(now),
                    });
                }
            }
        }
        let outputs = state
            .states
            .iter()
            .zip(&next.states)
            .enumerate()
            .filter_map(|(i, (b, a))| match (b.output, a.output) {
                (None, Some(v)) => Some((ProcessId(i), v)),
                _ => None,
            })
            .collect();
        trace.steps.push(TraceStep {
            event: StepEvent::Flp(event),
            outputs,
        });
        state = next;
    }
    let fairness = fairness_window.map(|w| {
        let end = state.events;
        for pid in state.live() {
            if end - last_step[pid.0] > w {
                violations.push(FairnessViolation::Unstepped {
                    pid,
                    from: last_step[pid.0],
                    to: end,
                });
            }
        }
        for (&id, m) in &state.in_flight {
            if state.is_live(m.to) && end - m.sent_at > w {
                violations.push(FairnessViolation::StaleMessage {
                    id,
                    sent_at: m.sent_at,
                    delivered_at: None,
                });
            }
        }
        FairnessReport { window: w, violations }
    });
    Ok(AsyncRun {
        trace,
        final_state: state,
        fairness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{AsyncStep, ProtocolError};

    /// Broadcasts a counter on every step and outputs 1 after hearing three
    /// messages.
    struct Chatter;

    impl AsyncProtocol for Chatter {
        fn id(&self) -> String {
            "chatter".into()
        }

        fn init(&self, _: ProcessCtx, _: Bit) -> Vec<u8> {
            vec![0]
        }

        fn step(&self, ctx: ProcessCtx, internal: &[u8], incoming: Option<(ProcessId, &[u8])>) -> Result<AsyncStep, ProtocolError> {
            let heard = internal[0].saturating_add(u8::from(incoming.is_some()));
            let sends = if internal[0] == 0 && incoming.is_none() {
                ctx.others().map(|q| (q, vec![ctx.pid.0 as u8])).collect()
            } else {
                Vec::new()
            };
            Ok(AsyncStep {
                internal: vec![heard],
                sends,
                output: (heard >= 2).then_some(Bit::One),
            })
        }
    }

    fn inputs(n: usize) -> Vec<Bit> {
        vec![Bit::Zero; n]
    }

    #[test]
    fn empty_inbox_step_only_sends() {
        let s = AsyncSystemState::initial(&Chatter, &inputs(3));
        let s = step_async(&s, &Chatter, AsyncEvent::step(ProcessId(1), None)).unwrap();
        assert_eq!(s.in_flight.len(), 2);
        assert!(s.in_flight.values().all(|m| m.from == ProcessId(1) && m.to != ProcessId(1)));
        assert_eq!(s.states[1].internal, vec![0]);
    }

    #[test]
    fn crashed_process_is_never_stepped_again() {
        let s = AsyncSystemState::initial(&Chatter, &inputs(3));
        let s = step_async(&s, &Chatter, AsyncEvent::crash(ProcessId(2))).unwrap();
        assert_eq!(
            step_async(&s, &Chatter, AsyncEvent::step(ProcessId(2), None)),
            Err(EngineError::Crashed(ProcessId(2)))
        );
        assert!(matches!(
            step_async(&s, &Chatter, AsyncEvent::crash(ProcessId(0))),
            Err(EngineError::SecondCrash { .. })
        ));
        let mut rr = make_scheduler(SchedulerKind::RoundRobin, None).unwrap();
        for _ in 0..10 {
            assert_ne!(rr.next_event(&s).unwrap().pid, ProcessId(2));
        }
    }

    #[test]
    fn delivering_unknown_or_misaddressed_message_fails() {
        let s = AsyncSystemState::initial(&Chatter, &inputs(3));
        let s = step_async(&s, &Chatter, AsyncEvent::step(ProcessId(0), None)).unwrap();
        assert_eq!(
            step_async(&s, &Chatter, AsyncEvent::step(ProcessId(1), Some(9))),
            Err(EngineError::NoSuchMessage { id: 9, pid: ProcessId(1) })
        );
        // message 0 goes to process 1, not 2
        assert!(step_async(&s, &Chatter, AsyncEvent::step(ProcessId(2), Some(0))).is_err());
        let s = step_async(&s, &Chatter, AsyncEvent::step(ProcessId(1), Some(0))).unwrap();
        // delivered exactly once
        assert!(step_async(&s, &Chatter, AsyncEvent::step(ProcessId(1), Some(0))).is_err());
    }

    #[test]
    fn deliver_then_step_replays_identically() {
        let events = [
            AsyncEvent::step(ProcessId(0), None),
            AsyncEvent::step(ProcessId(1), Some(0)),
            AsyncEvent::step(ProcessId(2), Some(1)),
        ];
        let replay = || {
            events.iter().fold(AsyncSystemState::initial(&Chatter, &inputs(3)), |s, &e| {
                step_async(&s, &Chatter, e).unwrap()
            })
        };
        assert_eq!(replay(), replay());
    }

    #[test]
    fn round_robin_is_cyclic_and_fair() {
        let mut rr = make_scheduler(SchedulerKind::RoundRobin, None).unwrap();
        let run = run_async(&inputs(4), &Chatter, rr.as_mut(), 400, Some(8)).unwrap();
        let order: Vec<usize> = run
            .trace
            .steps
            .iter()
            .take(8)
            .map(|s| match s.event {
                StepEvent::Flp(e) => e.pid.0,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(order, vec![0, 1, 2, 3, 0, 1, 2, 3]);
        assert!(run.fairness.unwrap().is_fair());
    }

    #[test]
    fn starving_a_process_is_reported() {
        struct SkipTwo(usize);
        impl Scheduler for SkipTwo {
            fn next_event(&mut self, state: &AsyncSystemState) -> Option<AsyncEvent> {
                self.0 = (self.0 + 1) % 2;
                let pid = ProcessId(self.0);
                Some(AsyncEvent::step(pid, state.pending_for(pid).next().map(|(id, _)| id)))
            }
        }
        let run = run_async(&inputs(3), &Chatter, &mut SkipTwo(0), 50, Some(10)).unwrap();
        let report = run.fairness.unwrap();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, FairnessViolation::Unstepped { pid: ProcessId(2), .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, FairnessViolation::StaleMessage { delivered_at: None, .. })));
    }

    #[test]
    fn seeded_random_runs_replay_identically() {
        let go = |seed| {
            let mut s = make_scheduler(SchedulerKind::SeededRandomFair { seed, window: 32 }, None).unwrap();
            run_async(&inputs(4), &Chatter, s.as_mut(), 10_000, Some(32))
                .unwrap()
                .trace
                .to_jsonl()
        };
        assert_eq!(go(3), go(3));
        assert_ne!(go(3), go(4));
    }

    #[test]
    fn scripted_scheduler_reproduces_recorded_trace() {
        let crash = Some(CrashPlan {
            pid: ProcessId(1),
            at_event: 17,
        });
        let mut s = make_scheduler(SchedulerKind::SeededRandomFair { seed: 9, window: 16 }, crash).unwrap();
        let first = run_async(&inputs(3), &Chatter, s.as_mut(), 300, None).unwrap();
        let mut replay = ScriptedScheduler::from_steps(&first.trace.steps).unwrap();
        let second = run_async(&inputs(3), &Chatter, &mut replay, u64::MAX, None).unwrap();
        assert_eq!(first.trace, second.trace);
        assert_eq!(first.final_state, second.final_state);
        assert_eq!(second.final_state.crashed, Some(ProcessId(1)));
    }

    #[test]
    fn self_sends_are_rejected() {
        struct Narcissus;
        impl AsyncProtocol for Narcissus {
            fn id(&self) -> String {
                "narcissus".into()
            }
            fn init(&self, _: ProcessCtx, _: Bit) -> Vec<u8> {
                vec![]
            }
            fn step(&self, ctx: ProcessCtx, _: &[u8], _: Option<(ProcessId, &[u8])>) -> Result<AsyncStep, ProtocolError> {
                Ok(AsyncStep {
                    internal: vec![],
                    sends: vec![(ctx.pid, vec![])],
                    output: None,
                })
            }
        }
        let s = AsyncSystemState::initial(&Narcissus, &inputs(3));
        assert_eq!(
            step_async(&s, &Narcissus, AsyncEvent::step(ProcessId(0), None)),
            Err(EngineError::SelfSend(ProcessId(0)))
        );
    }

    proptest::proptest! {
        #[test]
        fn at_most_one_crash_and_messages_conserved(seed in 0u64..500, crash_at in 0u64..200, victim in 0usize..4) {
            let crash = Some(CrashPlan { pid: ProcessId(victim), at_event: crash_at });
            let mut s = make_scheduler(SchedulerKind::SeededRandomFair { seed, window: 32 }, crash).unwrap();
            let run = run_async(&inputs(4), &Chatter, s.as_mut(), 300, None).unwrap();
            let mut crashed = None;
            let mut delivered = std::collections::BTreeSet::new();
            for step in &run.trace.steps {
                let StepEvent::Flp(e) = step.event else { unreachable!() };
                proptest::prop_assert!(crashed != Some(e.pid));
                if e.crash {
                    proptest::prop_assert!(crashed.is_none());
                    crashed = Some(e.pid);
                }
                if let Some(id) = e.deliver {
                    proptest::prop_assert!(delivered.insert(id));
                }
            }
            let sent = run.final_state.next_id;
            proptest::prop_assert!(delivered.iter().all(|&id| id < sent));
            proptest::prop_assert_eq!(delivered.len() + run.final_state.in_flight.len(), sent as usize);
        }
    }
}
