use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::protocol::{
    decode_payload, decode_state, encode, AsyncProtocol, AsyncStep, Inbox, ProcessCtx, ProtocolError, RoundProtocol, Transition,
};
use crate::types::{Bit, Configuration, ProcessId};

/// Default bound on the number of simulated messages a process remembers.
pub const DEFAULT_SEEN_CAP: usize = 100_000;

/// Runs an asynchronous protocol on the fail-to-receive engine.
///
/// Every real message carries all simulated messages its sender has ever
/// seen. A process delivers each simulated message addressed to it as soon as
/// it first sees it, one inner step per message, in ascending id order. A
/// round that delivers nothing still takes one empty inner step.
pub struct Piggyback {
    inner: Arc<dyn AsyncProtocol>,
    seen_cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MsgId {
    pub from: ProcessId,
    pub seq: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimMsg {
    pub to: ProcessId,
    /// Real round whose transition produced the message.
    pub sent_round: u64,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiggybackState {
    pub inner: Vec<u8>,
    pub started: bool,
    pub next_seq: u64,
    pub seen: BTreeMap<MsgId, SimMsg>,
    /// Delivery round of every message delivered here.
    pub delivered: BTreeMap<MsgId, u64>,
}

impl Piggyback {
    pub fn new(inner: Arc<dyn AsyncProtocol>) -> Self {
        Self::with_cap(inner, DEFAULT_SEEN_CAP)
    }

    pub fn with_cap(inner: Arc<dyn AsyncProtocol>, seen_cap: usize) -> Self {
        Piggyback { inner, seen_cap }
    }

    pub fn inner(&self) -> &Arc<dyn AsyncProtocol> {
        &self.inner
    }

    pub fn decode(bytes: &[u8]) -> Result<PiggybackState, ProtocolError> {
        decode_state(bytes)
    }

    fn apply(
        &self,
        ctx: ProcessCtx,
        st: &mut PiggybackState,
        round: u64,
        step: AsyncStep,
        output: &mut Option<Bit>,
    ) -> Result<(), ProtocolError> {
        st.inner = step.internal;
        *output = output.or(step.output);
        for (to, payload) in step.sends {
            if to == ctx.pid || to.0 >= ctx.n {
                return Err(ProtocolError::Unsupported(format!("simulated send from {} to {to}", ctx.pid)));
            }
            let id = MsgId {
                from: ctx.pid,
                seq: st.next_seq,
            };
            st.next_seq += 1;
            st.seen.insert(
                id,
                SimMsg {
                    to,
                    sent_round: round,
                    payload,
                },
            );
        }
        self.check_cap(st)
    }

    fn check_cap(&self, st: &PiggybackState) -> Result<(), ProtocolError> {
        if st.seen.len() > self.seen_cap {
            return Err(ProtocolError::ResourceLimit(format!(
                "{} simulated messages seen, cap is {}",
                st.seen.len(),
                self.seen_cap
            )));
        }
        Ok(())
    }
}

impl RoundProtocol for Piggyback {
    fn id(&self) -> String {
        format!("piggyback({})", self.inner.id())
    }

    fn init(&self, ctx: ProcessCtx, input: Bit) -> Vec<u8> {
        encode(&PiggybackState {
            inner: self.inner.init(ctx, input),
            started: false,
            next_seq: 0,
            seen: BTreeMap::new(),
            delivered: BTreeMap::new(),
        })
    }

    fn message(&self, ctx: ProcessCtx, internal: &[u8], _: u64) -> Result<Vec<u8>, ProtocolError> {
        if ctx.n < 3 {
            return Err(ProtocolError::Unsupported(format!("piggyback needs n >= 3, got {}", ctx.n)));
        }
        Ok(encode(&Self::decode(internal)?.seen))
    }

    fn transition(&self, ctx: ProcessCtx, internal: &[u8], round: u64, received: &Inbox<'_>) -> Result<Transition, ProtocolError> {
        let mut st = Self::decode(internal)?;
        for &(from, bytes) in received {
            let seen: BTreeMap<MsgId, SimMsg> = decode_payload(from, bytes)?;
            st.seen.extend(seen);
        }
        self.check_cap(&st)?;
        let mut output = None;
        let mut stepped = false;
        if !st.started {
            st.started = true;
            stepped = true;
            let step = self.inner.step(ctx, &st.inner, None)?;
            self.apply(ctx, &mut st, round, step, &mut output)?;
        }
        let due: Vec<MsgId> = st
            .seen
            .iter()
            .filter(|(id, m)| m.to == ctx.pid && !st.delivered.contains_key(id))
            .map(|(&id, _)| id)
            .collect();
        for id in due {
            let payload = st.seen[&id].payload.clone();
            let step = self.inner.step(ctx, &st.inner, Some((id.from, &payload)))?;
            st.delivered.insert(id, round);
            stepped = true;
            self.apply(ctx, &mut st, round, step, &mut output)?;
        }
        if !stepped {
            let step = self.inner.step(ctx, &st.inner, None)?;
            self.apply(ctx, &mut st, round, step, &mut output)?;
        }
        Ok(Transition {
            internal: encode(&st),
            output,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub id: MsgId,
    pub to: ProcessId,
    pub sent_round: u64,
    pub delivered_round: Option<u64>,
}

impl LedgerEntry {
    pub fn latency(&self) -> Option<u64> {
        self.delivered_round.map(|d| d - self.sent_round)
    }
}

/// Every simulated message any process has seen, with its delivery round at
/// the recipient.
pub fn delivery_ledger(config: &Configuration) -> Result<Vec<LedgerEntry>, ProtocolError> {
    let states = config
        .states
        .iter()
        .map(|s| Piggyback::decode(&s.internal))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all = BTreeMap::new();
    for st in &states {
        for (id, m) in &st.seen {
            all.entry(*id).or_insert((m.to, m.sent_round));
        }
    }
    Ok(all
        .into_iter()
        .map(|(id, (to, sent_round))| LedgerEntry {
            id,
            to,
            sent_round,
            delivered_round: states[to.0].delivered.get(&id).copied(),
        })
        .collect())
}

/// Ledger entries whose latency exceeds `bound`, or that are still
/// undelivered although `last_round - sent_round >= bound`.
pub fn late_deliveries(ledger: &[LedgerEntry], bound: u64, last_round: u64) -> Vec<LedgerEntry> {
    ledger
        .iter()
        .filter(|e| match e.latency() {
            Some(l) => l > bound,
            None => last_round >= e.sent_round + bound,
        })
        .cloned()
        .collect()
}
