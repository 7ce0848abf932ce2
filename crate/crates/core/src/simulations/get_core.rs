use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::protocol::{decode_payload, decode_state, encode, Inbox, ProcessCtx, ProtocolError, RoundProtocol, Transition};
use crate::types::{Bit, Configuration, LocalState, ProcessId, RoundFault};

/// Runs a fail-to-send protocol on the fail-to-receive engine, spending three
/// real rounds (phases) per simulated round.
///
/// Phase 1 broadcasts the simulated message, phases 2 and 3 broadcast every
/// simulated message known so far, and the end of phase 3 delivers all known
/// messages to the inner protocol. A process always knows its own message.
pub struct GetCore {
    inner: Arc<dyn RoundProtocol>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GetCoreState {
    pub inner: Vec<u8>,
    /// Simulated messages of the current simulated round, own included.
    pub known: BTreeMap<ProcessId, Vec<u8>>,
    /// Senders delivered at the end of the last simulated round, self included.
    pub last_delivered: Option<BTreeSet<ProcessId>>,
}

pub const PHASES: u64 = 3;

/// Simulated round and phase (1..=3) of a real round.
pub fn phase_of(round: u64) -> (u64, u64) {
    ((round - 1) / PHASES + 1, (round - 1) % PHASES + 1)
}

impl GetCore {
    pub fn new(inner: Arc<dyn RoundProtocol>) -> Self {
        GetCore { inner }
    }

    pub fn inner(&self) -> &Arc<dyn RoundProtocol> {
        &self.inner
    }

    pub fn decode(bytes: &[u8]) -> Result<GetCoreState, ProtocolError> {
        decode_state(bytes)
    }

    /// The inner configuration, if `config` sits on a simulated-round
    /// boundary.
    pub fn inner_configuration(config: &Configuration) -> Result<Option<Configuration>, ProtocolError> {
        let (sim, phase) = phase_of(config.round);
        if phase != 1 {
            return Ok(None);
        }
        let states = config
            .states
            .iter()
            .map(|s| {
                Ok(LocalState {
                    input: s.input,
                    internal: Self::decode(&s.internal)?.inner,
                    output: s.output,
                })
            })
            .collect::<Result<_, ProtocolError>>()?;
        Ok(Some(Configuration { round: sim, states }))
    }

    /// The delivery report of the simulated round that just ended, if
    /// `config` directly follows a phase 3.
    pub fn simulated_round(config: &Configuration) -> Result<Option<SimulatedRound>, ProtocolError> {
        let (sim, phase) = phase_of(config.round);
        if phase != 1 || sim == 1 {
            return Ok(None);
        }
        let delivered = config
            .states
            .iter()
            .map(|s| {
                Self::decode(&s.internal)?
                    .last_delivered
                    .ok_or_else(|| ProtocolError::MalformedState("no delivery recorded".into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(SimulatedRound::new(sim - 1, delivered)))
    }
}

fn check_n(ctx: ProcessCtx) -> Result<(), ProtocolError> {
    if ctx.n < 3 {
        return Err(ProtocolError::Unsupported(format!("get-core needs n >= 3, got {}", ctx.n)));
    }
    Ok(())
}

impl RoundProtocol for GetCore {
    fn id(&self) -> String {
        format!("get-core({})", self.inner.id())
    }

    fn init(&self, ctx: ProcessCtx, input: Bit) -> Vec<u8> {
        encode(&GetCoreState {
            inner: self.inner.init(ctx, input),
            known: BTreeMap::new(),
            last_delivered: None,
        })
    }

    fn message(&self, ctx: ProcessCtx, internal: &[u8], round: u64) -> Result<Vec<u8>, ProtocolError> {
        check_n(ctx)?;
        let st = Self::decode(internal)?;
        let (sim, phase) = phase_of(round);
        if phase == 1 {
            let own = self.inner.message(ctx, &st.inner, sim)?;
            return Ok(encode(&BTreeMap::from([(ctx.pid, own)])));
        }
        Ok(encode(&st.known))
    }

    fn transition(&self, ctx: ProcessCtx, internal: &[u8], round: u64, received: &Inbox<'_>) -> Result<Transition, ProtocolError> {
        check_n(ctx)?;
        let mut st = Self::decode(internal)?;
        let (sim, phase) = phase_of(round);
        if phase == 1 {
            st.known = BTreeMap::from([(ctx.pid, self.inner.message(ctx, &st.inner, sim)?)]);
        }
        for &(from, bytes) in received {
            let set: BTreeMap<ProcessId, Vec<u8>> = decode_payload(from, bytes)?;
            for (sender, payload) in set {
                if sender.0 >= ctx.n {
                    return Err(ProtocolError::MalformedPayload {
                        from,
                        reason: format!("simulated sender {sender} out of range"),
                    });
                }
                match st.known.get(&sender) {
                    Some(existing) if *existing != payload => {
                        return Err(ProtocolError::MalformedPayload {
                            from,
                            reason: format!("conflicting copies of {sender}'s simulated message"),
                        })
                    }
                    Some(_) => {}
                    None => {
                        st.known.insert(sender, payload);
                    }
                }
            }
        }
        if phase != PHASES {
            return Ok(Transition {
                internal: encode(&st),
                output: None,
            });
        }
        let known = std::mem::take(&mut st.known);
        let inbox: Vec<(ProcessId, &[u8])> = known
            .iter()
            .filter(|(&p, _)| p != ctx.pid)
            .map(|(&p, m)| (p, m.as_slice()))
            .collect();
        let t = self.inner.transition(ctx, &st.inner, sim, &inbox)?;
        st.inner = t.internal;
        st.last_delivered = Some(known.keys().copied().collect());
        Ok(Transition {
            internal: encode(&st),
            output: t.output,
        })
    }
}

/// Who delivered whose simulated message in one simulated round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulatedRound {
    pub round: u64,
    /// `delivered[q]`: senders whose message `q` delivered, `q` included.
    pub delivered: Vec<BTreeSet<ProcessId>>,
    pub core: BTreeSet<ProcessId>,
}

impl SimulatedRound {
    pub fn new(round: u64, delivered: Vec<BTreeSet<ProcessId>>) -> Self {
        let core = core_set(&delivered);
        SimulatedRound { round, delivered, core }
    }

    /// Holds iff the core has at least `n - 1` members.
    pub fn check(&self) -> Result<(), EmulationViolation> {
        let n = self.delivered.len();
        if self.core.len() + 1 < n {
            return Err(EmulationViolation {
                round: self.round,
                core: self.core.clone(),
            });
        }
        Ok(())
    }

    /// The fail-to-send fault this round amounts to.
    pub fn classify(&self) -> Result<RoundFault, EmulationViolation> {
        self.check()?;
        let n = self.delivered.len();
        let missing: Vec<ProcessId> = ProcessId::all(n).filter(|p| !self.core.contains(p)).collect();
        Ok(match missing.as_slice() {
            [] => RoundFault::none(),
            [p] => RoundFault::new(*p, ProcessId::all(n).filter(|q| !self.delivered[q.0].contains(p))),
            _ => unreachable!("checked core size"),
        })
    }
}

/// Senders whose simulated message every process delivered.
pub fn core_set(delivered: &[BTreeSet<ProcessId>]) -> BTreeSet<ProcessId> {
    let mut iter = delivered.iter();
    let Some(first) = iter.next() else { return BTreeSet::new() };
    iter.fold(first.clone(), |acc, s| acc.intersection(s).copied().collect())
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("emulation violated in simulated round {round}: core {core:?} has fewer than n-1 members")]
pub struct EmulationViolation {
    pub round: u64,
    pub core: BTreeSet<ProcessId>,
}
