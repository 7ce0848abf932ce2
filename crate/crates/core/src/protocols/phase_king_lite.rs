use crate::protocol::{Inbox, ProcessCtx, ProtocolError, RoundProtocol, Transition};
use crate::types::{Bit, ProcessId};

/// A pseudo-consensus protocol for the fail-to-send model built from the
/// phase-king pattern.
///
/// Rounds pair into phases; phase `k` (rounds `2k-1`, `2k`) has king
/// `(k - 1) mod n`. Each process keeps a preference `v`, initially its input.
///
/// * Odd round: broadcast `v`. Let `V` be the received values plus the own
///   one. If `|V| >= n - 1` and every value in `V` is `b`, adopt and output
///   `b`; otherwise adopt the majority of `V`, ties to `0`.
/// * Even round: broadcast `v`. A non-king that hears the king adopts the
///   king's value.
///
/// Deciding needs a near-unanimous view. With a single faulty sender per
/// round, that forces every other process's majority to the same value in
/// the same round, and an all-`b` system stays all-`b` under any fault.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseKingLite;

impl PhaseKingLite {
    pub const ID: &'static str = "phase-king-lite";

    pub fn king(round: u64, n: usize) -> ProcessId {
        let phase = round.div_ceil(2);
        ProcessId(((phase - 1) % n as u64) as usize)
    }

    /// Decodes the preference stored in a process's internal state.
    pub fn preference(internal: &[u8]) -> Result<Bit, ProtocolError> {
        match internal {
            [v] => Bit::try_from(*v).map_err(ProtocolError::MalformedState),
            _ => Err(ProtocolError::MalformedState(format!("{} bytes, expected 1", internal.len()))),
        }
    }
}

fn payload_bit(from: ProcessId, payload: &[u8]) -> Result<Bit, ProtocolError> {
    match payload {
        [v] => Bit::try_from(*v).map_err(|reason| ProtocolError::MalformedPayload { from, reason }),
        _ => Err(ProtocolError::MalformedPayload {
            from,
            reason: format!("{} bytes, expected 1", payload.len()),
        }),
    }
}

pub(crate) fn majority(ones: usize, total: usize) -> Bit {
    Bit::from_bool(2 * ones > total)
}

impl RoundProtocol for PhaseKingLite {
    fn id(&self) -> String {
        Self::ID.into()
    }

    fn init(&self, _: ProcessCtx, input: Bit) -> Vec<u8> {
        vec![input.as_u8()]
    }

    fn message(&self, _: ProcessCtx, internal: &[u8], _: u64) -> Result<Vec<u8>, ProtocolError> {
        Ok(vec![Self::preference(internal)?.as_u8()])
    }

    fn transition(&self, ctx: ProcessCtx, internal: &[u8], round: u64, received: &Inbox<'_>) -> Result<Transition, ProtocolError> {
        let own = Self::preference(internal)?;
        let (v, output) = if round % 2 == 1 {
            let mut ones = usize::from(own == Bit::One);
            for &(from, payload) in received {
                ones += usize::from(payload_bit(from, payload)? == Bit::One);
            }
            let total = received.len() + 1;
            if total + 1 >= ctx.n && (ones == 0 || ones == total) {
                (own, Some(own))
            } else {
                (majority(ones, total), None)
            }
        } else {
            let king = Self::king(round, ctx.n);
            match received.iter().find(|(from, _)| *from == king) {
                Some(&(from, payload)) if ctx.pid != king => (payload_bit(from, payload)?, None),
                _ => (own, None),
            }
        };
        Ok(Transition {
            internal: vec![v.as_u8()],
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sync_engine::{enumerate_send_faults, initial_configuration, step_ftr, step_fts};
    use crate::types::{Configuration, ReceiveFault, RoundFault};

    fn bits(v: &[u8]) -> Vec<Bit> {
        v.iter().map(|&b| Bit::try_from(b).unwrap()).collect()
    }

    fn all_inputs(n: usize) -> impl Iterator<Item = Vec<Bit>> {
        (0..1u32 << n).map(move |m| (0..n).map(|i| Bit::from_bool(m & (1 << i) != 0)).collect())
    }

    fn run_with(c: &Configuration, mut fault: impl FnMut(u64) -> RoundFault, rounds: u64) -> Vec<Configuration> {
        let mut out = vec![c.clone()];
        for _ in 0..rounds {
            let last = out.last().unwrap();
            let f = fault(last.round);
            out.push(step_fts(last, &PhaseKingLite, &f).unwrap());
        }
        out
    }

    #[test]
    fn kings_cycle_through_processes() {
        let kings: Vec<usize> = (1..=8).map(|r| PhaseKingLite::king(r, 3).0).collect();
        assert_eq!(kings, vec![0, 0, 1, 1, 2, 2, 0, 0]);
    }

    #[test]
    fn failure_free_mixed_inputs_decide_in_round_three() {
        for inputs in all_inputs(3).filter(|i| i.contains(&Bit::One) && i.contains(&Bit::Zero)) {
            let c = initial_configuration(&PhaseKingLite, &inputs);
            let runs = run_with(&c, |_| RoundFault::none(), 3);
            assert_eq!(runs[2].output_count(), 0, "no decision before round 3 for {inputs:?}");
            assert!(runs[3].all_output(), "all decide in round 3 for {inputs:?}");
            // phase 1 round A sees every input, so the decision is the input majority
            let ones = inputs.iter().filter(|&&b| b == Bit::One).count();
            let expected = majority(ones, 3);
            assert!(runs[3].states.iter().all(|s| s.output == Some(expected)));
        }
    }

    #[test]
    fn unanimous_inputs_decide_in_round_one_even_when_silenced() {
        for b in [Bit::Zero, Bit::One] {
            let c = initial_configuration(&PhaseKingLite, &[b; 4]);
            for f in enumerate_send_faults(4, false) {
                let next = step_fts(&c, &PhaseKingLite, &f).unwrap();
                assert!(next.states.iter().all(|s| s.output == Some(b)));
            }
        }
    }

    #[test]
    fn every_one_silent_run_decides_within_six_rounds() {
        for inputs in all_inputs(3) {
            let c = initial_configuration(&PhaseKingLite, &inputs);
            for p in 0..3 {
                let runs = run_with(&c, |_| RoundFault::silent(ProcessId(p), 3), 6);
                let last = runs.last().unwrap();
                assert!(last.all_output(), "inputs {inputs:?}, silent {p}");
                let d = last.states[0].output;
                assert!(last.states.iter().all(|s| s.output == d));
            }
        }
    }

    #[test]
    fn decision_view_needs_n_minus_one_values() {
        // process 2 misses process 0: its view {1,1} has n - 1 values and decides
        let c = initial_configuration(&PhaseKingLite, &bits(&[1, 1, 1]));
        let next = step_fts(&c, &PhaseKingLite, &RoundFault::new(ProcessId(0), [ProcessId(2)])).unwrap();
        assert_eq!(next.states[2].output, Some(Bit::One));
        // a single dissenter blocks every decision and majority wins
        let c = initial_configuration(&PhaseKingLite, &bits(&[1, 1, 1, 0]));
        let g = ReceiveFault::new([(ProcessId(0), ProcessId(3))]).unwrap();
        let next = step_ftr(&c, &PhaseKingLite, &g).unwrap();
        // process 0 misses the dissenter and sees {1, 1, 1}: decides
        assert_eq!(next.states[0].output, Some(Bit::One));
        assert_eq!(next.states[3].output, None);
        assert_eq!(PhaseKingLite::preference(&next.states[3].internal).unwrap(), Bit::One);
    }

    #[test]
    fn malformed_payload_is_reported() {
        let ctx = ProcessCtx::new(ProcessId(0), 3);
        let bad: &[u8] = &[7];
        let err = PhaseKingLite.transition(ctx, &[0], 1, &[(ProcessId(1), bad)]).unwrap_err();
        assert!(matches!(err, ProtocolError::MalformedPayload { from: ProcessId(1), .. }));
    }
}
