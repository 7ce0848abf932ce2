//! Synthesis of non-deciding fail-to-send executions.
//!
//! Given any pseudo-consensus protocol (one that keeps agreement and
//! validity always, and terminates at least in failure-free and 1-silent
//! executions), this module builds an execution of arbitrary length in which
//! no process ever outputs.
//!
//! The construction tracks *p-dependent* configurations: the failure-free
//! continuation decides one value while the continuation in which `p` is
//! silenced forever decides the other. Nobody can have decided in such a
//! configuration. The attack finds a dependent initial configuration, then
//! repeatedly picks a fault whose successor is again dependent on some
//! process. Both steps use the same flip argument on a chain of adjacent
//! configurations: somewhere along the chain the failure-free decision flips,
//! and one of the two configurations at the flip is dependent on the process
//! in which they differ.
//!
//! The adversary here is omniscient: it reads full configurations.

use crate::error::EngineError;
use crate::protocol::RoundProtocol;
use crate::sync_engine::{initial_configuration, new_outputs, step_fts};
use crate::trace::{ExecutionTrace, StepEvent, TraceStep};
use crate::types::{Bit, Configuration, ProcessId, RoundFault};

/// Oracle cap used when the caller has no better bound.
pub fn default_cap(n: usize) -> u64 {
    10 * n as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionOracleResult {
    pub decision: Bit,
    pub rounds_used: u64,
}

/// Which continuation an oracle explores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuation {
    FailureFree,
    Silent(ProcessId),
}

impl Continuation {
    fn fault(self, n: usize) -> RoundFault {
        match self {
            Continuation::FailureFree => RoundFault::none(),
            Continuation::Silent(p) => RoundFault::silent(p, n),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum NondeciderError {
    #[error("oracle cap of {cap} rounds exceeded from round {from_round} ({continuation:?}); the target is not pseudo-consensus-live")]
    OracleCapExceeded {
        cap: u64,
        from_round: u64,
        continuation: Continuation,
    },
    #[error("agreement violation from round {from_round} ({continuation:?}) after {} rounds", faults.len())]
    AgreementViolation {
        from_round: u64,
        continuation: Continuation,
        /// Faults applied from the probed configuration up to the violation.
        faults: Vec<RoundFault>,
    },
    #[error("validity violation: unanimous inputs {input} decide {decision}; no dependent initial configuration")]
    ValidityViolation { input: Bit, decision: Bit },
    #[error("no flip in chain: failure-free decision is {0} at both ends")]
    NoFlip(Bit),
    #[error("chain exhausted at round {round}: the restricted adversary cannot reach a dependent successor")]
    ChainExhausted { round: u64 },
    #[error("configurations {index} and {next} of the chain differ in more than the declared process")]
    NotAdjacent { index: usize, next: usize },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Runs `continuation` from `config` until every process has output, and
/// returns the common value.
pub fn decision_oracle(
    config: &Configuration,
    protocol: &dyn RoundProtocol,
    continuation: Continuation,
    cap: u64,
) -> Result<DecisionOracleResult, NondeciderError> {
    let n = config.n();
    let fault = continuation.fault(n);
    let mut current = config.clone();
    let mut faults = Vec::new();
    for rounds_used in 0..=cap {
        let outputs = current.outputs();
        let mut values = outputs.values();
        if let Some(&first) = values.next() {
            if values.any(|&v| v != first) {
                return Err(NondeciderError::AgreementViolation {
                    from_round: config.round,
                    continuation,
                    faults,
                });
            }
            if outputs.len() == n {
                return Ok(DecisionOracleResult {
                    decision: first,
                    rounds_used,
                });
            }
        }
        if rounds_used == cap {
            break;
        }
        current = step_fts(&current, protocol, &fault)?;
        faults.push(fault.clone());
    }
    Err(NondeciderError::OracleCapExceeded {
        cap,
        from_round: config.round,
        continuation,
    })
}

/// Decision of the failure-free continuation from `config`.
pub fn failure_free_decision(
    config: &Configuration,
    protocol: &dyn RoundProtocol,
    cap: u64,
) -> Result<DecisionOracleResult, NondeciderError> {
    decision_oracle(config, protocol, Continuation::FailureFree, cap)
}

/// Decision of the continuation in which `p` is silenced every round.
pub fn silent_decision(
    config: &Configuration,
    p: ProcessId,
    protocol: &dyn RoundProtocol,
    cap: u64,
) -> Result<DecisionOracleResult, NondeciderError> {
    decision_oracle(config, protocol, Continuation::Silent(p), cap)
}

/// Evidence that `config` is `process`-dependent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependenceWitness {
    pub config: Configuration,
    pub process: ProcessId,
    pub ff_decision: Bit,
    pub silent_decision: Bit,
}

impl DependenceWitness {
    /// Re-runs both oracles and checks they still disagree and match the
    /// recorded values.
    pub fn verify(&self, protocol: &dyn RoundProtocol, cap: u64) -> Result<bool, NondeciderError> {
        let ff = failure_free_decision(&self.config, protocol, cap)?.decision;
        let silent = silent_decision(&self.config, self.process, protocol, cap)?.decision;
        Ok(ff != silent && ff == self.ff_decision && silent == self.silent_decision)
    }
}

/// Returns a witness iff the failure-free and `p`-silent decisions from
/// `config` differ.
pub fn is_p_dependent(
    config: &Configuration,
    p: ProcessId,
    protocol: &dyn RoundProtocol,
    cap: u64,
) -> Result<Option<DependenceWitness>, NondeciderError> {
    let ff = failure_free_decision(config, protocol, cap)?.decision;
    let silent = silent_decision(config, p, protocol, cap)?.decision;
    if ff == silent {
        return Ok(None);
    }
    if config.output_count() > 0 {
        return Err(NondeciderError::Invariant(format!(
            "configuration at round {} is {p}-dependent although {} process(es) already output",
            config.round,
            config.output_count()
        )));
    }
    Ok(Some(DependenceWitness {
        config: config.clone(),
        process: p,
        ff_decision: ff,
        silent_decision: silent,
    }))
}

/// Configurations `c_0..c_m` where consecutive `c_{i-1}`, `c_i` differ at
/// most in the local state of `differing[i-1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacentChain {
    configs: Vec<Configuration>,
    differing: Vec<ProcessId>,
}

impl AdjacentChain {
    pub fn new(configs: Vec<Configuration>, differing: Vec<ProcessId>) -> Result<Self, NondeciderError> {
        if configs.is_empty() || differing.len() + 1 != configs.len() {
            return Err(NondeciderError::Invariant(format!(
                "{} configurations need {} differing processes, got {}",
                configs.len(),
                configs.len().saturating_sub(1),
                differing.len()
            )));
        }
        for (i, p) in differing.iter().enumerate() {
            let diff = configs[i].differing_processes(&configs[i + 1]);
            if diff.iter().any(|q| q != p) {
                return Err(NondeciderError::NotAdjacent { index: i, next: i + 1 });
            }
        }
        Ok(AdjacentChain { configs, differing })
    }

    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    /// `differing()[i - 1]` is the process in which `c_{i-1}` and `c_i` differ.
    pub fn differing(&self) -> &[ProcessId] {
        &self.differing
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainHit {
    pub index: usize,
    pub process: ProcessId,
    pub witness: DependenceWitness,
}

/// Locates a dependent configuration in a chain whose end points have
/// different failure-free decisions.
///
/// Scans for the first flip `ff(c_{j-1}) != ff(c_j)`. If the `p_j`-silent
/// decision from `c_j` differs from `ff(c_j)`, `c_j` is `p_j`-dependent.
/// Otherwise `c_{j-1}` is: silencing `p_j` hides the only difference between
/// the two, so their `p_j`-silent decisions coincide.
pub fn find_dependent_in_chain(chain: &AdjacentChain, protocol: &dyn RoundProtocol, cap: u64) -> Result<ChainHit, NondeciderError> {
    let configs = chain.configs();
    let first = failure_free_decision(&configs[0], protocol, cap)?.decision;
    let last = failure_free_decision(&configs[configs.len() - 1], protocol, cap)?.decision;
    if first == last {
        return Err(NondeciderError::NoFlip(first));
    }
    let prev = first;
    for j in 1..configs.len() {
        let ff = if j == configs.len() - 1 {
            last
        } else {
            failure_free_decision(&configs[j], protocol, cap)?.decision
        };
        if ff == prev {
            continue;
        }
        let p = chain.differing()[j - 1];
        let silent = silent_decision(&configs[j], p, protocol, cap)?.decision;
        let index = if silent != ff { j } else { j - 1 };
        let witness = is_p_dependent(&configs[index], p, protocol, cap)?.ok_or_else(|| {
            NondeciderError::Invariant(format!(
                "configuration {index} of the chain failed re-verification as {p}-dependent"
            ))
        })?;
        return Ok(ChainHit {
            index,
            process: p,
            witness,
        });
    }
    unreachable!("end points differ, so some consecutive pair flips")
}

/// The `n + 1` initial configurations where processes below `i` have input 1
/// and the rest input 0.
pub fn initial_chain(protocol: &dyn RoundProtocol, n: usize) -> AdjacentChain {
    let configs = (0..=n)
        .map(|i| {
            let inputs: Vec<Bit> = (0..n).map(|j| Bit::from_bool(j < i)).collect();
            initial_configuration(protocol, &inputs)
        })
        .collect();
    let differing = (0..n).map(ProcessId).collect();
    AdjacentChain { configs, differing }
}

/// A dependent initial configuration, found on the monotone chain from
/// all-0 to all-1 inputs.
pub fn find_initial_dependent(protocol: &dyn RoundProtocol, n: usize, cap: u64) -> Result<DependenceWitness, NondeciderError> {
    let chain = initial_chain(protocol, n);
    for (config, input) in [(&chain.configs()[0], Bit::Zero), (&chain.configs()[n], Bit::One)] {
        let decision = failure_free_decision(config, protocol, cap)?.decision;
        if decision != input {
            return Err(NondeciderError::ValidityViolation { input, decision });
        }
    }
    Ok(find_dependent_in_chain(&chain, protocol, cap)?.witness)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extension {
    pub fault: RoundFault,
    pub witness: DependenceWitness,
}

/// Victim set under which `p`'s message reaches exactly the first `reached`
/// other processes in ascending id order.
fn progressive_victims(p: ProcessId, n: usize, reached: usize) -> RoundFault {
    RoundFault::new(p, ProcessId::all(n).filter(|&q| q != p).skip(reached))
}

/// Picks a fault from a `p`-dependent configuration whose successor is
/// dependent on some process.
///
/// With `b` the `p`-silent decision: if silencing `p` for one round already
/// yields failure-free decision `!b`, that successor is `p`-dependent.
/// Otherwise the successors in which `p`'s message reaches the first
/// `0, 1, .., n-1` other processes form an adjacent chain from decision `b`
/// to `!b`, and the flip argument applies.
///
/// In `restricted` mode the fully silenced successor is unavailable; the
/// chain starts one configuration later and may no longer flip.
pub fn extend_dependent(
    witness: &DependenceWitness,
    protocol: &dyn RoundProtocol,
    cap: u64,
    restricted: bool,
) -> Result<Extension, NondeciderError> {
    let config = &witness.config;
    let p = witness.process;
    let n = config.n();
    let b = witness.silent_decision;

    let first_reach = usize::from(restricted);
    let faults: Vec<RoundFault> = (first_reach..n).map(|k| progressive_victims(p, n, k)).collect();
    let configs = faults
        .iter()
        .map(|f| step_fts(config, protocol, f))
        .collect::<Result<Vec<_>, _>>()?;

    if !restricted {
        let ff = failure_free_decision(&configs[0], protocol, cap)?.decision;
        if ff != b {
            let witness = is_p_dependent(&configs[0], p, protocol, cap)?
                .ok_or_else(|| NondeciderError::Invariant(format!("{p}-silent successor failed re-verification")))?;
            return Ok(Extension {
                fault: faults[0].clone(),
                witness,
            });
        }
    }

    let last = failure_free_decision(&configs[configs.len() - 1], protocol, cap)?.decision;
    if last == b {
        return Err(NondeciderError::Invariant(format!(
            "failure-free successor decides {last}, the {p}-silent decision; the target is not deterministic"
        )));
    }
    let differing = ProcessId::all(n)
        .filter(|&q| q != p)
        .skip(first_reach)
        .take(configs.len() - 1)
        .collect();
    let chain = AdjacentChain::new(configs, differing)?;
    match find_dependent_in_chain(&chain, protocol, cap) {
        Ok(hit) => Ok(Extension {
            fault: faults[hit.index].clone(),
            witness: hit.witness,
        }),
        Err(NondeciderError::NoFlip(_)) if restricted => Err(NondeciderError::ChainExhausted { round: config.round }),
        Err(e) => Err(e),
    }
}

/// A finite prefix of a non-deciding execution together with the witness
/// for every configuration on it (initial one included).
#[derive(Clone, Debug)]
pub struct NondecidingExecution {
    pub trace: ExecutionTrace,
    pub witnesses: Vec<DependenceWitness>,
}

impl NondecidingExecution {
    pub fn faults(&self) -> impl Iterator<Item = &StepEvent> {
        self.trace.steps.iter().map(|s| &s.event)
    }
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("{error}")]
pub struct AttackFailure {
    pub error: NondeciderError,
    /// The execution built before the failure.
    pub partial: Option<Box<NondecidingExecution>>,
}

/// Builds an `rounds`-round fail-to-send execution in which every
/// configuration is dependent on some process, so no process outputs.
pub fn build_nondeciding_execution(
    protocol: &dyn RoundProtocol,
    n: usize,
    rounds: u64,
    cap: u64,
    restricted: bool,
) -> Result<NondecidingExecution, AttackFailure> {
    let fail = |error, partial: Option<NondecidingExecution>| AttackFailure {
        error,
        partial: partial.map(Box::new),
    };
    let initial = find_initial_dependent(protocol, n, cap).map_err(|e| fail(e, None))?;
    let mut exec = NondecidingExecution {
        trace: ExecutionTrace::new(crate::trace::Model::Fts, protocol.id(), initial.config.inputs()),
        witnesses: vec![initial],
    };
    for _ in 0..rounds {
        let current = exec.witnesses.last().expect("seeded with the initial witness");
        let ext = match extend_dependent(current, protocol, cap, restricted) {
            Ok(ext) => ext,
            Err(e) => return Err(fail(e, Some(exec))),
        };
        let outputs = new_outputs(&current.config, &ext.witness.config);
        if ext.witness.config.output_count() > 0 {
            let e = NondeciderError::Invariant(format!("output written in round {}", current.config.round));
            return Err(fail(e, Some(exec)));
        }
        exec.trace.steps.push(TraceStep {
            event: StepEvent::from_send_fault(current.config.round, &ext.fault),
            outputs,
        });
        exec.witnesses.push(ext.witness);
    }
    Ok(exec)
}
