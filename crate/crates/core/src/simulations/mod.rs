//! Model reductions as protocol wrappers, and stack descriptors that compose
//! them.
//!
//! A stack such as `fts-over-ftr-over-flp` names the model the protocol is
//! written for first and the model actually executed last. Each adjacent
//! pair is realized by one wrapper:
//!
//! | pair           | wrapper        |
//! |----------------|----------------|
//! | `fts-over-ftr` | [`GetCore`]    |
//! | `ftr-over-flp` | [`Synchronizer`] |
//! | `flp-over-ftr` | [`Piggyback`]  |
//! | `ftr-over-fts` | none: a fail-to-send fault is a fail-to-receive fault |

mod get_core;
mod piggyback;
mod synchronizer;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use get_core::{core_set, phase_of, EmulationViolation, GetCore, GetCoreState, SimulatedRound, PHASES};
pub use piggyback::{delivery_ledger, late_deliveries, LedgerEntry, MsgId, Piggyback, PiggybackState, SimMsg, DEFAULT_SEEN_CAP};
pub use synchronizer::{min_live_round, project, Projection, ProjectionError, RoundLog, Synchronizer, SynchronizerState};

use crate::protocol::AnyProtocol;
use crate::trace::Model;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stack {
    /// Top model first.
    layers: Vec<Model>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StackError {
    #[error("malformed stack descriptor {0:?}")]
    Malformed(String),
    #[error("no simulation of {upper} over {lower}")]
    Unsupported { upper: Model, lower: Model },
    #[error("protocol {protocol} is not written for the {model} model")]
    ProtocolKind { protocol: String, model: Model },
}

impl Stack {
    pub fn new(layers: Vec<Model>) -> Result<Self, StackError> {
        if layers.len() < 2 {
            return Err(StackError::Malformed(format!("{layers:?}")));
        }
        for w in layers.windows(2) {
            if !matches!(
                (w[0], w[1]),
                (Model::Fts, Model::Ftr) | (Model::Ftr, Model::Flp) | (Model::Flp, Model::Ftr) | (Model::Ftr, Model::Fts)
            ) {
                return Err(StackError::Unsupported { upper: w[0], lower: w[1] });
            }
        }
        Ok(Stack { layers })
    }

    pub fn layers(&self) -> &[Model] {
        &self.layers
    }

    pub fn top(&self) -> Model {
        self.layers[0]
    }

    /// The model whose engine executes the stack.
    pub fn bottom(&self) -> Model {
        *self.layers.last().expect("at least two layers")
    }

    /// The stack without its bottom layer, if that still has two layers.
    pub fn upper(&self) -> Option<Stack> {
        (self.layers.len() > 2).then(|| Stack {
            layers: self.layers[..self.layers.len() - 1].to_vec(),
        })
    }

    /// The model the bottom wrapper simulates.
    pub fn simulated(&self) -> Model {
        self.layers[self.layers.len() - 2]
    }

    /// Wraps `protocol`, written for the top model, into a protocol for the
    /// bottom model.
    pub fn wrap(&self, protocol: AnyProtocol) -> Result<AnyProtocol, StackError> {
        let kind_ok = match self.top() {
            Model::Flp => protocol.as_async().is_some(),
            Model::Fts | Model::Ftr => protocol.as_round().is_some(),
        };
        if !kind_ok {
            return Err(StackError::ProtocolKind {
                protocol: protocol.id(),
                model: self.top(),
            });
        }
        let mut current = protocol;
        for w in self.layers.windows(2) {
            current = match (w[0], w[1], current) {
                (Model::Fts, Model::Ftr, AnyProtocol::Round(p)) => AnyProtocol::Round(Arc::new(GetCore::new(p))),
                (Model::Ftr, Model::Flp, AnyProtocol::Round(p)) => AnyProtocol::Async(Arc::new(Synchronizer::new(p))),
                (Model::Flp, Model::Ftr, AnyProtocol::Async(p)) => AnyProtocol::Round(Arc::new(Piggyback::new(p))),
                (Model::Ftr, Model::Fts, p @ AnyProtocol::Round(_)) => p,
                (upper, lower, _) => return Err(StackError::Unsupported { upper, lower }),
            };
        }
        Ok(current)
    }
}

impl FromStr for Stack {
    type Err = StackError;

    fn from_str(s: &str) -> Result<Self, StackError> {
        let layers = s
            .split("-over-")
            .map(|m| m.parse::<Model>().map_err(|_| StackError::Malformed(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Stack::new(layers)
    }
}

impl fmt::Display for Stack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.layers.iter().map(|m| m.name()).collect();
        f.write_str(&names.join("-over-"))
    }
}
