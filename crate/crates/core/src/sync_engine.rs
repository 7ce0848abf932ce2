//! Lockstep executors for the fail-to-send and fail-to-receive models.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;
use crate::protocol::{ProcessCtx, RoundProtocol};
use crate::trace::{ExecutionTrace, Model, StepEvent, TraceStep};
use crate::types::{Bit, Configuration, FaultShapeError, LocalState, ProcessId, ReceiveFault, RoundFault};

/// A per-round adversary choice of one of the synchronous models.
pub trait SyncFault: Clone + std::fmt::Debug {
    const MODEL: Model;

    fn delivers(&self, from: ProcessId, to: ProcessId) -> bool;

    fn record(&self, round: u64) -> StepEvent;

    fn from_record(event: &StepEvent, n: usize) -> Result<Self, FaultShapeError>;

    fn fault_free() -> Self;
}

impl SyncFault for RoundFault {
    const MODEL: Model = Model::Fts;

    fn delivers(&self, from: ProcessId, to: ProcessId) -> bool {
        RoundFault::delivers(self, from, to)
    }

    fn record(&self, round: u64) -> StepEvent {
        StepEvent::from_send_fault(round, self)
    }

    fn from_record(event: &StepEvent, n: usize) -> Result<Self, FaultShapeError> {
        event.to_send_fault(n)
    }

    fn fault_free() -> Self {
        RoundFault::none()
    }
}

impl SyncFault for ReceiveFault {
    const MODEL: Model = Model::Ftr;

    fn delivers(&self, from: ProcessId, to: ProcessId) -> bool {
        ReceiveFault::delivers(self, from, to)
    }

    fn record(&self, round: u64) -> StepEvent {
        StepEvent::from_receive_fault(round, self)
    }

    fn from_record(event: &StepEvent, n: usize) -> Result<Self, FaultShapeError> {
        event.to_receive_fault(n)
    }

    fn fault_free() -> Self {
        ReceiveFault::none()
    }
}

/// The round-1 configuration for the given inputs.
pub fn initial_configuration(protocol: &dyn RoundProtocol, inputs: &[Bit]) -> Configuration {
    let n = inputs.len();
    Configuration {
        round: 1,
        states: inputs
            .iter()
            .enumerate()
            .map(|(i, &input)| LocalState {
                input,
                internal: protocol.init(ProcessCtx::new(ProcessId(i), n), input),
                output: None,
            })
            .collect(),
    }
}

/// Merges a transition's output into a write-once register.
pub(crate) fn write_output(current: Option<Bit>, written: Option<Bit>, round: u64, pid: ProcessId) -> Result<Option<Bit>, EngineError> {
    match (current, written) {
        (Some(old), Some(new)) if old != new => Err(EngineError::WriteOnce { round, pid, old, new }),
        (Some(old), _) => Ok(Some(old)),
        (None, w) => Ok(w),
    }
}

/// Executes one synchronous round in which `q` receives `p`'s message iff
/// `delivers(p, q)`.
pub fn step_with(
    config: &Configuration,
    protocol: &dyn RoundProtocol,
    delivers: impl Fn(ProcessId, ProcessId) -> bool,
) -> Result<Configuration, EngineError> {
    let n = config.n();
    let round = config.round;
    let messages = config
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pid = ProcessId(i);
            protocol
                .message(ProcessCtx::new(pid, n), &s.internal, round)
                .map_err(|source| EngineError::Protocol { round, pid, source })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut states = Vec::with_capacity(n);
    let mut inbox = Vec::with_capacity(n);
    for (i, s) in config.states.iter().enumerate() {
        let q = ProcessId(i);
        inbox.clear();
        inbox.extend(
            ProcessId::all(n)
                .filter(|&p| p != q && delivers(p, q))
                .map(|p| (p, messages[p.0].as_slice())),
        );
        let t = protocol
            .transition(ProcessCtx::new(q, n), &s.internal, round, &inbox)
            .map_err(|source| EngineError::Protocol { round, pid: q, source })?;
        states.push(LocalState {
            input: s.input,
            internal: t.internal,
            output: write_output(s.output, t.output, round, q)?,
        });
    }
    Ok(Configuration { round: round + 1, states })
}

pub fn step<F: SyncFault>(config: &Configuration, protocol: &dyn RoundProtocol, fault: &F) -> Result<Configuration, EngineError> {
    step_with(config, protocol, |p, q| fault.delivers(p, q))
}

/// One fail-to-send round: everyone hears everyone except that the victims
/// miss the sender.
pub fn step_fts(config: &Configuration, protocol: &dyn RoundProtocol, fault: &RoundFault) -> Result<Configuration, EngineError> {
    step(config, protocol, fault)
}

/// One fail-to-receive round: each receiver misses at most its dropped sender.
pub fn step_ftr(config: &Configuration, protocol: &dyn RoundProtocol, fault: &ReceiveFault) -> Result<Configuration, EngineError> {
    step(config, protocol, fault)
}

/// Outputs present in `after` but not in `before`.
pub fn new_outputs(before: &Configuration, after: &Configuration) -> std::collections::BTreeMap<ProcessId, Bit> {
    before
        .states
        .iter()
        .zip(&after.states)
        .enumerate()
        .filter_map(|(i, (b, a))| match (b.output, a.output) {
            (None, Some(v)) => Some((ProcessId(i), v)),
            _ => None,
        })
        .collect()
}

/// Chooses each round's fault. Policies see only the public history of the
/// run (faults and outputs), never internal states.
pub trait AdversaryPolicy<F: SyncFault> {
    fn next_fault(&mut self, round: u64, history: &ExecutionTrace) -> F;
}

impl<F: SyncFault, P: AdversaryPolicy<F> + ?Sized> AdversaryPolicy<F> for &mut P {
    fn next_fault(&mut self, round: u64, history: &ExecutionTrace) -> F {
        (**self).next_fault(round, history)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NoFaults;

impl<F: SyncFault> AdversaryPolicy<F> for NoFaults {
    fn next_fault(&mut self, _: u64, _: &ExecutionTrace) -> F {
        F::fault_free()
    }
}

/// Drops every message of one process, every round.
#[derive(Clone, Copy, Debug)]
pub struct Silent {
    pub pid: ProcessId,
    pub n: usize,
}

impl AdversaryPolicy<RoundFault> for Silent {
    fn next_fault(&mut self, _: u64, _: &ExecutionTrace) -> RoundFault {
        RoundFault::silent(self.pid, self.n)
    }
}

impl AdversaryPolicy<ReceiveFault> for Silent {
    fn next_fault(&mut self, _: u64, _: &ExecutionTrace) -> ReceiveFault {
        RoundFault::silent(self.pid, self.n).to_receive_fault()
    }
}

/// Replays a fixed fault list; rounds past the end of the script are
/// fault-free.
#[derive(Clone, Debug)]
pub struct Scripted<F> {
    faults: Vec<F>,
}

impl<F: SyncFault> Scripted<F> {
    pub fn new(faults: Vec<F>) -> Self {
        Scripted { faults }
    }

    pub fn from_steps(steps: &[TraceStep], n: usize) -> Result<Self, FaultShapeError> {
        steps
            .iter()
            .map(|s| F::from_record(&s.event, n))
            .collect::<Result<_, _>>()
            .map(Scripted::new)
    }
}

impl<F: SyncFault> AdversaryPolicy<F> for Scripted<F> {
    fn next_fault(&mut self, round: u64, _: &ExecutionTrace) -> F {
        let idx = round.saturating_sub(1) as usize;
        self.faults.get(idx).cloned().unwrap_or_else(F::fault_free)
    }
}

/// Seeded random fail-to-send adversary: a quarter of rounds fault-free, a
/// quarter fully silencing a random sender, the rest a random victim subset.
#[derive(Clone, Debug)]
pub struct RandomSendFaults {
    pub n: usize,
    pub rng: ChaCha8Rng,
}

impl RandomSendFaults {
    pub fn new(n: usize, rng: ChaCha8Rng) -> Self {
        RandomSendFaults { n, rng }
    }

    pub fn sample(&mut self) -> RoundFault {
        let sender = ProcessId(self.rng.gen_range(0..self.n));
        match self.rng.gen_range(0..4) {
            0 => RoundFault::none(),
            1 => RoundFault::silent(sender, self.n),
            _ => {
                let victims: Vec<_> = ProcessId::all(self.n).filter(|_| self.rng.gen_bool(0.5)).collect();
                RoundFault::new(sender, victims)
            }
        }
    }
}

impl AdversaryPolicy<RoundFault> for RandomSendFaults {
    fn next_fault(&mut self, _: u64, _: &ExecutionTrace) -> RoundFault {
        self.sample()
    }
}

/// Seeded random fail-to-receive adversary: each receiver independently
/// drops one random sender with probability one half. With
/// `allow_full_silence == false`, rounds in which some sender would be lost at
/// every other process are resampled.
#[derive(Clone, Debug)]
pub struct RandomReceiveFaults {
    pub n: usize,
    pub rng: ChaCha8Rng,
    pub allow_full_silence: bool,
}

impl RandomReceiveFaults {
    pub fn new(n: usize, rng: ChaCha8Rng, allow_full_silence: bool) -> Self {
        RandomReceiveFaults {
            n,
            rng,
            allow_full_silence,
        }
    }

    pub fn sample(&mut self) -> ReceiveFault {
        loop {
            let mut dropped = Vec::new();
            for q in 0..self.n {
                if self.rng.gen_bool(0.5) {
                    let mut s = self.rng.gen_range(0..self.n - 1);
                    if s >= q {
                        s += 1;
                    }
                    dropped.push((ProcessId(q), ProcessId(s)));
                }
            }
            let fault = ReceiveFault::new(dropped).expect("sampled drops are well-formed");
            if self.allow_full_silence || !silences_someone(&fault, self.n) {
                return fault;
            }
        }
    }
}

/// True if some sender's message is lost at every other process.
pub fn silences_someone(fault: &ReceiveFault, n: usize) -> bool {
    ProcessId::all(n).any(|s| ProcessId::all(n).filter(|&q| q != s).all(|q| !fault.delivers(s, q)))
}

impl AdversaryPolicy<ReceiveFault> for RandomReceiveFaults {
    fn next_fault(&mut self, _: u64, _: &ExecutionTrace) -> ReceiveFault {
        self.sample()
    }
}

/// Runs `horizon` rounds from `config`, recording every fault and every
/// newly written output. Never stops early: decided processes keep
/// participating.
///
/// The trace header carries `config`'s inputs, so it replays only when
/// `config` is an initial configuration.
pub fn run<F: SyncFault>(
    config: &Configuration,
    protocol: &dyn RoundProtocol,
    policy: &mut dyn AdversaryPolicy<F>,
    horizon: u64,
) -> Result<ExecutionTrace, EngineError> {
    run_observed(config, protocol, policy, horizon, |_| {}).map(|(trace, _)| trace)
}

/// As [`run`], calling `observe` on every configuration reached (including
/// the starting one) and returning the final configuration.
pub fn run_observed<F: SyncFault>(
    config: &Configuration,
    protocol: &dyn RoundProtocol,
    policy: &mut dyn AdversaryPolicy<F>,
    horizon: u64,
    mut observe: impl FnMut(&Configuration),
) -> Result<(ExecutionTrace, Configuration), EngineError> {
    let mut trace = ExecutionTrace::new(F::MODEL, protocol.id(), config.inputs());
    let mut current = config.clone();
    observe(&current);
    for _ in 0..horizon {
        let round = current.round;
        let fault = policy.next_fault(round, &trace);
        let next = step(&current, protocol, &fault)?;
        trace.steps.push(TraceStep {
            event: fault.record(round),
            outputs: new_outputs(&current, &next),
        });
        observe(&next);
        current = next;
    }
    Ok((trace, current))
}

/// A fault of either synchronous model.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AnySyncFault {
    Send(RoundFault),
    Receive(ReceiveFault),
}

/// Every canonical fail-to-send fault: each sender with each subset of the
/// other processes as victims. `restricted` removes the full victim set, so at
/// most `n - 2` of the sender's messages are lost.
///
/// Fault-free rounds appear once per sender (with an empty victim set).
pub fn enumerate_send_faults(n: usize, restricted: bool) -> Vec<RoundFault> {
    let mut out = Vec::new();
    for s in 0..n {
        let others: Vec<ProcessId> = ProcessId::all(n).filter(|&q| q.0 != s).collect();
        let full = (1u64 << others.len()) - 1;
        for mask in 0..=full {
            if restricted && mask == full {
                continue;
            }
            let victims = others.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &p)| p);
            out.push(RoundFault::new(ProcessId(s), victims));
        }
    }
    out
}

/// Every fail-to-receive drop map: each receiver drops nothing or one of the
/// `n - 1` other senders.
pub fn enumerate_receive_faults(n: usize) -> Vec<ReceiveFault> {
    // choice[q] == 0 means no drop, otherwise index into q's other senders
    let mut choice = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        let dropped = choice.iter().enumerate().filter(|(_, &c)| c > 0).map(|(q, &c)| {
            let s = if c > q { c } else { c - 1 };
            (ProcessId(q), ProcessId(s))
        });
        out.push(ReceiveFault::new(dropped).expect("enumerated drops are well-formed"));
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < n {
                break;
            }
            choice[i] = 0;
        }
    }
}

pub fn enumerate_faults(model: Model, n: usize, restricted: bool) -> Result<Vec<AnySyncFault>, EngineError> {
    match model {
        Model::Fts => Ok(enumerate_send_faults(n, restricted).into_iter().map(AnySyncFault::Send).collect()),
        Model::Ftr => Ok(enumerate_receive_faults(n).into_iter().map(AnySyncFault::Receive).collect()),
        Model::Flp => Err(EngineError::UnsupportedModel(Model::Flp)),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::protocol::{decode_state, encode, Inbox, ProtocolError, Transition};
    use crate::rng::stream;

    /// Records, per round, the senders it heard from.
    pub(crate) struct Probe;

    impl RoundProtocol for Probe {
        fn id(&self) -> String {
            "probe".into()
        }

        fn init(&self, _: ProcessCtx, _: Bit) -> Vec<u8> {
            encode(&Vec::<Vec<usize>>::new())
        }

        fn message(&self, ctx: ProcessCtx, _: &[u8], round: u64) -> Result<Vec<u8>, ProtocolError> {
            Ok(encode(&(ctx.pid.0, round)))
        }

        fn transition(&self, _: ProcessCtx, internal: &[u8], _: u64, received: &Inbox<'_>) -> Result<Transition, ProtocolError> {
            let mut log: Vec<Vec<usize>> = decode_state(internal)?;
            log.push(received.iter().map(|(p, _)| p.0).collect());
            Ok(Transition {
                internal: encode(&log),
                output: None,
            })
        }
    }

    pub(crate) fn heard(config: &Configuration, pid: usize) -> Vec<Vec<usize>> {
        decode_state(&config.states[pid].internal).unwrap()
    }

    fn start(n: usize) -> Configuration {
        initial_configuration(&Probe, &vec![Bit::Zero; n])
    }

    #[test]
    fn fault_free_round_delivers_everything() {
        let c = step_fts(&start(4), &Probe, &RoundFault::none()).unwrap();
        for q in 0..4 {
            assert_eq!(heard(&c, q)[0].len(), 3);
        }
        assert_eq!(c.round, 2);
    }

    #[test]
    fn full_silence_hides_sender_from_everyone() {
        let c = step_fts(&start(4), &Probe, &RoundFault::silent(ProcessId(2), 4)).unwrap();
        for q in 0..4 {
            assert!(!heard(&c, q)[0].contains(&2));
        }
        assert_eq!(heard(&c, 2)[0], vec![0, 1, 3]);
    }

    #[test]
    fn single_victim_receives_one_fewer() {
        let c = step_fts(&start(3), &Probe, &RoundFault::new(ProcessId(0), [ProcessId(1)])).unwrap();
        let counts: Vec<usize> = (0..3).map(|q| heard(&c, q)[0].len()).collect();
        assert_eq!(counts, vec![2, 1, 2]);
    }

    #[test]
    fn receive_faults_may_drop_different_senders() {
        let f = ReceiveFault::new([
            (ProcessId(0), ProcessId(1)),
            (ProcessId(1), ProcessId(2)),
            (ProcessId(2), ProcessId(0)),
        ])
        .unwrap();
        assert_eq!(f.as_send_fault(), None);
        let c = step_ftr(&start(3), &Probe, &f).unwrap();
        assert_eq!(heard(&c, 0)[0], vec![2]);
        assert_eq!(heard(&c, 1)[0], vec![0]);
        assert_eq!(heard(&c, 2)[0], vec![1]);
    }

    #[test]
    fn receive_fault_all_dropping_p_equals_full_send_fault() {
        let pkl = crate::protocols::PhaseKingLite;
        let inputs = [Bit::One, Bit::Zero, Bit::Zero];
        let c = initial_configuration(&pkl, &inputs);
        let g = ReceiveFault::new([(ProcessId(0), ProcessId(1)), (ProcessId(2), ProcessId(1))]).unwrap();
        let f = RoundFault::silent(ProcessId(1), 3);
        assert_eq!(step_ftr(&c, &pkl, &g).unwrap(), step_fts(&c, &pkl, &f).unwrap());
    }

    #[test]
    fn every_send_fault_embeds_in_receive_model() {
        let pkl = crate::protocols::PhaseKingLite;
        for inputs in [[Bit::One, Bit::Zero, Bit::Zero], [Bit::Zero, Bit::One, Bit::One]] {
            let mut c = initial_configuration(&pkl, &inputs);
            for f in enumerate_send_faults(3, false) {
                let via_send = step_fts(&c, &pkl, &f).unwrap();
                assert_eq!(step_ftr(&c, &pkl, &f.to_receive_fault()).unwrap(), via_send);
                c = via_send;
            }
        }
    }

    #[test]
    fn fault_counts_match_direct_enumeration() {
        assert_eq!(enumerate_send_faults(3, false).len(), 12);
        assert_eq!(enumerate_send_faults(3, true).len(), 9);
        assert_eq!(enumerate_receive_faults(3).len(), 27);
        assert_eq!(enumerate_receive_faults(4).len(), 256);
        let distinct: HashSet<_> = enumerate_receive_faults(3).into_iter().collect();
        assert_eq!(distinct.len(), 27);
        let distinct: HashSet<_> = enumerate_send_faults(4, false).into_iter().collect();
        assert_eq!(distinct.len(), 4 * 8);
        assert!(enumerate_send_faults(3, true).iter().all(|f| f.victims().len() <= 1));
        assert!(matches!(
            enumerate_faults(Model::Flp, 3, false),
            Err(EngineError::UnsupportedModel(_))
        ));
    }

    #[test]
    fn horizon_zero_gives_header_only() {
        let t = run::<RoundFault>(&start(3), &Probe, &mut NoFaults, 0).unwrap();
        assert!(t.steps.is_empty());
        assert_eq!(t.to_jsonl().lines().count(), 1);
    }

    #[test]
    fn silent_policy_records_full_silence_every_round() {
        let t = run(
            &start(3),
            &Probe,
            &mut Silent { pid: ProcessId(1), n: 3 } as &mut dyn AdversaryPolicy<RoundFault>,
            5,
        )
        .unwrap();
        for s in &t.steps {
            assert_eq!(s.event.to_send_fault(3).unwrap(), RoundFault::silent(ProcessId(1), 3));
        }
    }

    #[test]
    fn write_once_is_enforced() {
        struct Flipper;
        impl RoundProtocol for Flipper {
            fn id(&self) -> String {
                "flipper".into()
            }
            fn init(&self, _: ProcessCtx, _: Bit) -> Vec<u8> {
                vec![]
            }
            fn message(&self, _: ProcessCtx, _: &[u8], _: u64) -> Result<Vec<u8>, ProtocolError> {
                Ok(vec![])
            }
            fn transition(&self, _: ProcessCtx, _: &[u8], round: u64, _: &Inbox<'_>) -> Result<Transition, ProtocolError> {
                Ok(Transition {
                    internal: vec![],
                    output: Some(Bit::from_bool(round.is_multiple_of(2))),
                })
            }
        }
        let c = initial_configuration(&Flipper, &[Bit::Zero; 3]);
        let c = step_fts(&c, &Flipper, &RoundFault::none()).unwrap();
        assert!(matches!(
            step_fts(&c, &Flipper, &RoundFault::none()),
            Err(EngineError::WriteOnce { round: 2, .. })
        ));
    }

    #[test]
    fn random_receive_policy_can_avoid_full_silence() {
        let mut policy = RandomReceiveFaults {
            n: 3,
            rng: stream(7, "adversary", 0),
            allow_full_silence: false,
        };
        for _ in 0..500 {
            assert!(!silences_someone(&policy.sample(), 3));
        }
    }

    proptest::proptest! {
        #[test]
        fn steps_are_pure(seed in 0u64..1000, inputs in proptest::collection::vec(proptest::bool::ANY, 3..6)) {
            let pkl = crate::protocols::PhaseKingLite;
            let inputs: Vec<Bit> = inputs.into_iter().map(Bit::from_bool).collect();
            let n = inputs.len();
            let mut adv = RandomReceiveFaults { n, rng: stream(seed, "adversary", 0), allow_full_silence: true };
            let mut c = initial_configuration(&pkl, &inputs);
            for _ in 0..8 {
                let f = adv.sample();
                // phase-king-lite is only safe under fts, so ftr runs may hit write-once
                let a = step_ftr(&c, &pkl, &f);
                proptest::prop_assert_eq!(&a, &step_ftr(&c, &pkl, &f));
                match a {
                    Ok(next) => c = next,
                    Err(_) => break,
                }
            }
        }

        #[test]
        fn receive_rounds_deliver_at_least_n_minus_two(seed in 0u64..1000, n in 3usize..7) {
            let mut adv = RandomReceiveFaults { n, rng: stream(seed, "adversary", 0), allow_full_silence: true };
            let mut c = start(n);
            for _ in 0..4 {
                c = step_ftr(&c, &Probe, &adv.sample()).unwrap();
            }
            for q in 0..n {
                for heard in heard(&c, q) {
                    proptest::prop_assert!(heard.len() >= n - 2);
                }
            }
        }
    }
}
