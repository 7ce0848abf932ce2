//! Concrete protocols and the id registry used by the CLI and the trace
//! validator.
//!
//! Base ids are `phase-king-lite`, `naive-majority`, `constant-0` and
//! `constant-1`. Simulation wrappers compose as `get-core(<id>)`,
//! `synchronizer(<id>)` and `piggyback(<id>)`.

mod naive;
mod phase_king_lite;

use std::sync::Arc;

pub use naive::{Constant, NaiveMajority};
pub use phase_king_lite::PhaseKingLite;

use crate::protocol::AnyProtocol;
use crate::simulations::{GetCore, Piggyback, Synchronizer};
use crate::types::Bit;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("unknown protocol {0:?}")]
    Unknown(String),
    #[error("{wrapper} wraps a {expected} protocol, {inner:?} is not one")]
    KindMismatch {
        wrapper: &'static str,
        expected: &'static str,
        inner: String,
    },
}

pub const BASE_IDS: [&str; 4] = ["phase-king-lite", "naive-majority", "constant-0", "constant-1"];

/// Resolves a protocol id, including nested simulation wrappers.
pub fn resolve(id: &str) -> Result<AnyProtocol, RegistryError> {
    let id = id.trim();
    if let Some(inner) = strip_wrapper(id, "get-core") {
        let inner = resolve(inner)?;
        let round = inner.as_round().ok_or_else(|| mismatch("get-core", "round", &inner))?;
        return Ok(AnyProtocol::Round(Arc::new(GetCore::new(round.clone()))));
    }
    if let Some(inner) = strip_wrapper(id, "synchronizer") {
        let inner = resolve(inner)?;
        let round = inner.as_round().ok_or_else(|| mismatch("synchronizer", "round", &inner))?;
        return Ok(AnyProtocol::Async(Arc::new(Synchronizer::new(round.clone()))));
    }
    if let Some(inner) = strip_wrapper(id, "piggyback") {
        let inner = resolve(inner)?;
        let a = inner.as_async().ok_or_else(|| mismatch("piggyback", "asynchronous", &inner))?;
        return Ok(AnyProtocol::Round(Arc::new(Piggyback::new(a.clone()))));
    }
    Ok(AnyProtocol::Round(match id {
        PhaseKingLite::ID => Arc::new(PhaseKingLite),
        NaiveMajority::ID => Arc::new(NaiveMajority),
        "constant-0" => Arc::new(Constant(Bit::Zero)),
        "constant-1" => Arc::new(Constant(Bit::One)),
        other => return Err(RegistryError::Unknown(other.to_string())),
    }))
}

fn strip_wrapper<'a>(id: &'a str, name: &str) -> Option<&'a str> {
    id.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')
}

fn mismatch(wrapper: &'static str, expected: &'static str, inner: &AnyProtocol) -> RegistryError {
    RegistryError::KindMismatch {
        wrapper,
        expected,
        inner: inner.id(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_ids_resolve_to_themselves() {
        for id in BASE_IDS {
            assert_eq!(resolve(id).unwrap().id(), id);
        }
    }

    #[test]
    fn wrappers_nest_and_round_trip_their_ids() {
        for id in [
            "get-core(phase-king-lite)",
            "synchronizer(phase-king-lite)",
            "piggyback(synchronizer(phase-king-lite))",
            "synchronizer(get-core(naive-majority))",
        ] {
            assert_eq!(resolve(id).unwrap().id(), id);
        }
        assert!(resolve("synchronizer(phase-king-lite)").unwrap().as_async().is_some());
    }

    #[test]
    fn bad_ids_are_rejected() {
        assert!(matches!(resolve("paxos"), Err(RegistryError::Unknown(s)) if s == "paxos"));
        assert!(matches!(
            resolve("piggyback(phase-king-lite)"),
            Err(RegistryError::KindMismatch { .. })
        ));
        assert!(matches!(
            resolve("get-core(synchronizer(constant-0))"),
            Err(RegistryError::KindMismatch { .. })
        ));
    }
}
