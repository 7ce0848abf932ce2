use crate::protocol::{Inbox, ProcessCtx, ProtocolError, RoundProtocol, Transition};
use crate::protocols::phase_king_lite::majority;
use crate::types::Bit;

/// Negative control: decide the majority of round-1 messages plus the own
/// input (ties to 0), then rebroadcast the decision forever. One faulty
/// sender is enough to split the decision.
#[derive(Clone, Copy, Debug, Default)]
pub struct NaiveMajority;

impl NaiveMajority {
    pub const ID: &'static str = "naive-majority";
}

fn value(bytes: &[u8]) -> Option<Bit> {
    bytes.first().and_then(|&v| Bit::try_from(v).ok())
}

impl RoundProtocol for NaiveMajority {
    fn id(&self) -> String {
        Self::ID.into()
    }

    fn init(&self, _: ProcessCtx, input: Bit) -> Vec<u8> {
        vec![input.as_u8()]
    }

    fn message(&self, _: ProcessCtx, internal: &[u8], _: u64) -> Result<Vec<u8>, ProtocolError> {
        Ok(internal.to_vec())
    }

    fn transition(&self, _: ProcessCtx, internal: &[u8], round: u64, received: &Inbox<'_>) -> Result<Transition, ProtocolError> {
        let own = value(internal).ok_or_else(|| ProtocolError::MalformedState("expected one bit".into()))?;
        if round != 1 {
            return Ok(Transition {
                internal: internal.to_vec(),
                output: None,
            });
        }
        let mut ones = usize::from(own == Bit::One);
        for &(from, payload) in received {
            let v = value(payload).ok_or_else(|| ProtocolError::MalformedPayload {
                from,
                reason: "expected one bit".into(),
            })?;
            ones += usize::from(v == Bit::One);
        }
        let decision = majority(ones, received.len() + 1);
        Ok(Transition {
            internal: vec![decision.as_u8()],
            output: Some(decision),
        })
    }
}

/// Outputs a fixed value in round 1 regardless of messages.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub Bit);

impl Constant {
    pub fn id_for(b: Bit) -> String {
        format!("constant-{b}")
    }
}

impl RoundProtocol for Constant {
    fn id(&self) -> String {
        Self::id_for(self.0)
    }

    fn init(&self, _: ProcessCtx, _: Bit) -> Vec<u8> {
        Vec::new()
    }

    fn message(&self, _: ProcessCtx, _: &[u8], _: u64) -> Result<Vec<u8>, ProtocolError> {
        Ok(Vec::new())
    }

    fn transition(&self, _: ProcessCtx, _: &[u8], _: u64, _: &Inbox<'_>) -> Result<Transition, ProtocolError> {
        Ok(Transition {
            internal: Vec::new(),
            output: Some(self.0),
        })
    }
}
