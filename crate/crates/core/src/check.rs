//! Property checking of round protocols: exhaustive search over inputs and
//! fault sequences, seeded fuzzing, and the pseudo-consensus termination
//! check.

use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;

use crate::error::EngineError;
use crate::protocol::RoundProtocol;
use crate::rng::stream;
use crate::sync_engine::{
    enumerate_receive_faults, enumerate_send_faults, initial_configuration, new_outputs, step, RandomReceiveFaults, RandomSendFaults,
    SyncFault,
};
use crate::trace::{ExecutionTrace, Model, TraceStep};
use crate::types::{Bit, Configuration, ProcessId, ReceiveFault, RoundFault};
use crate::validate::{check_colorless_outcome, ConsensusViolation};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Violation {
    #[error(transparent)]
    Consensus(#[from] ConsensusViolation),
    #[error(transparent)]
    Engine(EngineError),
    #[error("{continuation} run from inputs {inputs} has not fully decided after {rounds} rounds")]
    Termination { inputs: String, continuation: String, rounds: u64 },
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Consensus(ConsensusViolation::Agreement) => "agreement",
            Violation::Consensus(ConsensusViolation::Validity { .. }) => "validity",
            Violation::Engine(EngineError::WriteOnce { .. }) => "write-once",
            Violation::Engine(_) => "engine",
            Violation::Termination { .. } => "termination",
        }
    }
}

/// A violation together with a replayable trace ending where it shows.
#[derive(Clone, Debug)]
pub struct Counterexample {
    pub violation: Violation,
    pub trace: ExecutionTrace,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("{needed} branches exceed the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("operation not available for the {0} model")]
    UnsupportedModel(Model),
    #[error("n = {0} is below the minimum of 3 processes")]
    TooFewProcesses(usize),
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    /// Leaf branches (exhaustive) or runs (fuzz) examined.
    pub explored: u64,
    pub counterexample: Option<Counterexample>,
}

fn safety(config: &Configuration) -> Result<(), ConsensusViolation> {
    let inputs: BTreeSet<Bit> = config.inputs().into_iter().collect();
    let outputs: BTreeSet<Bit> = config.outputs().into_values().collect();
    check_colorless_outcome(&inputs, &outputs)
}

/// Replays `faults` from `inputs` and cuts the trace at the first violation.
pub fn counterexample_trace<F: SyncFault>(protocol: &dyn RoundProtocol, inputs: &[Bit], faults: &[F]) -> Option<Counterexample> {
    let mut config = initial_configuration(protocol, inputs);
    let mut trace = ExecutionTrace::new(F::MODEL, protocol.id(), inputs.to_vec());
    if let Err(v) = safety(&config) {
        return Some(Counterexample {
            violation: v.into(),
            trace,
        });
    }
    for f in faults {
        let round = config.round;
        let next = match step(&config, protocol, f) {
            Ok(next) => next,
            Err(e) => {
                trace.steps.push(TraceStep {
                    event: f.record(round),
                    outputs: Default::default(),
                });
                return Some(Counterexample {
                    violation: Violation::Engine(e),
                    trace,
                });
            }
        };
        trace.steps.push(TraceStep {
            event: f.record(round),
            outputs: new_outputs(&config, &next),
        });
        if let Err(v) = safety(&next) {
            return Some(Counterexample {
                violation: v.into(),
                trace,
            });
        }
        config = next;
    }
    None
}

/// All `2^n` input vectors, process 0 in the least significant bit.
pub fn all_inputs(n: usize) -> Vec<Vec<Bit>> {
    (0..1u64 << n)
        .map(|m| (0..n).map(|i| Bit::from_bool(m & (1 << i) != 0)).collect())
        .collect()
}

/// Leaf count of an exhaustive search.
pub fn exhaustive_branches(model: Model, n: usize, depth: u32, restricted: bool) -> Result<u128, CheckError> {
    let faults = match model {
        Model::Fts => enumerate_send_faults(n, restricted).len(),
        Model::Ftr => (n as u128).checked_pow(n as u32).map_or(usize::MAX, |v| v as usize),
        Model::Flp => return Err(CheckError::UnsupportedModel(model)),
    } as u128;
    Ok((1u128 << n).saturating_mul(faults.saturating_pow(depth)))
}

/// Branches explored from one root, and the first violating (input index,
/// fault indices) found there.
type RootOutcome = (u64, Option<(usize, Vec<usize>)>);

/// Explores every input vector and every fault sequence of length `depth`,
/// checking agreement, validity and write-once after every round.
///
/// The reported counterexample is the first one in enumeration order, so the
/// result does not depend on the worker count.
pub fn exhaustive(
    protocol: &dyn RoundProtocol,
    model: Model,
    n: usize,
    depth: u32,
    restricted: bool,
    budget: u128,
) -> Result<CheckReport, CheckError> {
    if n < 3 {
        return Err(CheckError::TooFewProcesses(n));
    }
    let needed = exhaustive_branches(model, n, depth, restricted)?;
    if needed > budget {
        return Err(CheckError::BudgetExceeded { needed, budget });
    }
    Ok(match model {
        Model::Fts => exhaustive_with(protocol, n, depth, &enumerate_send_faults(n, restricted)),
        Model::Ftr => exhaustive_with(protocol, n, depth, &enumerate_receive_faults(n)),
        Model::Flp => unreachable!("rejected above"),
    })
}

fn exhaustive_with<F: SyncFault + Send + Sync>(protocol: &dyn RoundProtocol, n: usize, depth: u32, faults: &[F]) -> CheckReport {
    struct Search<'a, F> {
        protocol: &'a dyn RoundProtocol,
        faults: &'a [F],
        depth: usize,
        path: Vec<usize>,
        leaves: u64,
    }

    impl<F: SyncFault> Search<'_, F> {
        /// Returns the fault-index path to the first violation below `config`.
        fn dfs(&mut self, config: &Configuration) -> Option<Vec<usize>> {
            if self.path.len() == self.depth {
                self.leaves += 1;
                return None;
            }
            for (i, f) in self.faults.iter().enumerate() {
                self.path.push(i);
                let bad = match step(config, self.protocol, f) {
                    Ok(next) => safety(&next).is_err() || self.dfs(&next).is_some(),
                    Err(_) => true,
                };
                if bad {
                    return Some(self.path.clone());
                }
                self.path.pop();
            }
            None
        }
    }

    let depth = depth as usize;
    let inputs = all_inputs(n);
    // one task per (input vector, first fault), so workers share nothing
    let roots: Vec<(usize, Option<usize>)> = if depth == 0 {
        (0..inputs.len()).map(|i| (i, None)).collect()
    } else {
        (0..inputs.len())
            .flat_map(|i| (0..faults.len()).map(move |f| (i, Some(f))))
            .collect()
    };
    let results: Vec<RootOutcome> = roots
        .par_iter()
        .map(|&(i, first)| {
            let start = initial_configuration(protocol, &inputs[i]);
            if safety(&start).is_err() {
                return (0, Some((i, Vec::new())));
            }
            let mut search = Search {
                protocol,
                faults,
                depth,
                path: Vec::new(),
                leaves: 0,
            };
            let found = match first {
                None => {
                    search.leaves = 1;
                    None
                }
                Some(f) => {
                    search.path.push(f);
                    match step(&start, protocol, &faults[f]) {
                        Ok(next) if safety(&next).is_ok() => search.dfs(&next),
                        _ => Some(vec![f]),
                    }
                }
            };
            (search.leaves, found.map(|p| (i, p)))
        })
        .collect();
    let explored = results.iter().map(|r| r.0).sum();
    let counterexample = results.into_iter().find_map(|r| r.1).and_then(|(i, path)| {
        let seq: Vec<F> = path.iter().map(|&k| faults[k].clone()).collect();
        counterexample_trace(protocol, &inputs[i], &seq)
    });
    CheckReport { explored, counterexample }
}

/// Fuzzing parameters. Run `i` uses `ns[i % ns.len()]` processes and draws
/// its inputs and faults from streams `("inputs", i)` and `("adversary", i)`
/// of `seed`.
#[derive(Clone, Debug)]
pub struct FuzzConfig {
    pub model: Model,
    pub ns: Vec<usize>,
    pub runs: u64,
    pub depth: u64,
    pub seed: u64,
}

/// Seeded random runs checked for agreement, validity and write-once. The
/// reported counterexample is the lowest-index failing run.
pub fn fuzz(protocol: &dyn RoundProtocol, cfg: &FuzzConfig) -> Result<CheckReport, CheckError> {
    if let Some(&n) = cfg.ns.iter().find(|&&n| n < 3) {
        return Err(CheckError::TooFewProcesses(n));
    }
    if cfg.ns.is_empty() {
        return Err(CheckError::TooFewProcesses(0));
    }
    if cfg.model == Model::Flp {
        return Err(CheckError::UnsupportedModel(Model::Flp));
    }
    let first_bad = (0..cfg.runs).into_par_iter().find_first(|&i| fuzz_run(protocol, cfg, i).is_some());
    let counterexample = first_bad.and_then(|i| fuzz_run(protocol, cfg, i));
    Ok(CheckReport {
        explored: first_bad.map_or(cfg.runs, |i| i + 1),
        counterexample,
    })
}

/// Inputs and faults of one fuzz run.
fn fuzz_run(protocol: &dyn RoundProtocol, cfg: &FuzzConfig, i: u64) -> Option<Counterexample> {
    let n = cfg.ns[(i % cfg.ns.len() as u64) as usize];
    let mut rng = stream(cfg.seed, "inputs", i);
    let inputs: Vec<Bit> = (0..n).map(|_| Bit::from_bool(rng.gen_bool(0.5))).collect();
    let adversary = stream(cfg.seed, "adversary", i);
    match cfg.model {
        Model::Fts => {
            let mut adv = RandomSendFaults::new(n, adversary);
            let faults: Vec<RoundFault> = (0..cfg.depth).map(|_| adv.sample()).collect();
            counterexample_trace(protocol, &inputs, &faults)
        }
        _ => {
            let mut adv = RandomReceiveFaults::new(n, adversary, true);
            let faults: Vec<ReceiveFault> = (0..cfg.depth).map(|_| adv.sample()).collect();
            counterexample_trace(protocol, &inputs, &faults)
        }
    }
}

/// Every failure-free and every 1-silent fail-to-send run, over all input
/// vectors, must have every process output within `deadline` rounds.
pub fn termination(protocol: &dyn RoundProtocol, n: usize, deadline: u64) -> Result<CheckReport, CheckError> {
    if n < 3 {
        return Err(CheckError::TooFewProcesses(n));
    }
    let continuations: Vec<Option<ProcessId>> = std::iter::once(None).chain(ProcessId::all(n).map(Some)).collect();
    let cases: Vec<(Vec<Bit>, Option<ProcessId>)> = all_inputs(n)
        .into_iter()
        .flat_map(|inp| continuations.iter().map(move |&c| (inp.clone(), c)))
        .collect();
    let explored = cases.len() as u64;
    let counterexample = cases.par_iter().find_map_first(|(inputs, silent)| {
        let fault = silent.map_or_else(RoundFault::none, |p| RoundFault::silent(p, n));
        let faults = vec![fault; deadline as usize];
        if let Some(c) = counterexample_trace(protocol, inputs, &faults) {
            return Some(c);
        }
        let mut config = initial_configuration(protocol, inputs);
        for f in &faults {
            config = step(&config, protocol, f).ok()?;
        }
        if config.all_output() {
            return None;
        }
        let mut trace = ExecutionTrace::new(Model::Fts, protocol.id(), inputs.clone());
        let mut c = initial_configuration(protocol, inputs);
        for f in &faults {
            let next = step(&c, protocol, f).ok()?;
            trace.steps.push(TraceStep {
                event: f.record(c.round),
                outputs: new_outputs(&c, &next),
            });
            c = next;
        }
        Some(Counterexample {
            violation: Violation::Termination {
                inputs: inputs.iter().map(|b| b.to_string()).collect(),
                continuation: silent.map_or_else(|| "failure-free".to_string(), |p| format!("{p}-silent")),
                rounds: deadline,
            },
            trace,
        })
    });
    Ok(CheckReport { explored, counterexample })
}
