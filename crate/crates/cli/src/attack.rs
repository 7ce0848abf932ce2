use omission_core::nondecider::{build_nondeciding_execution, default_cap, DependenceWitness, NondeciderError, NondecidingExecution};
use omission_core::RoundProtocol;
use serde_json::{json, Value};

use crate::args::AttackArgs;
use crate::exit::{CmdResult, Code, Failure};
use crate::flags::{self, fault_json};
use crate::out::Outputs;

fn witness_json(w: &DependenceWitness) -> Value {
    json!({"pid": w.process.0, "ff": w.ff_decision.as_u8(), "silent": w.silent_decision.as_u8()})
}

/// Writes one report line per configuration of the execution and re-checks
/// every witness with fresh oracle calls. Returns the number re-verified.
fn report_execution(
    out: &mut Outputs,
    protocol: &dyn RoundProtocol,
    exec: &NondecidingExecution,
    cap: u64,
) -> Result<usize, NondeciderError> {
    let mut verified = 0;
    for (i, w) in exec.witnesses.iter().enumerate() {
        let fault = match i {
            0 => Value::Null,
            _ => {
                let f = exec.trace.steps[i - 1]
                    .event
                    .to_send_fault(w.config.n())
                    .expect("attack faults are well-formed");
                fault_json(&f)
            }
        };
        out.line(json!({
            "round": i,
            "fault": fault,
            "witness": witness_json(w),
            "outputs": w.config.output_count(),
        }));
        if w.verify(protocol, cap)? {
            verified += 1;
        }
    }
    Ok(verified)
}

fn oracle_code(e: &NondeciderError) -> Code {
    match e {
        NondeciderError::OracleCapExceeded { .. } => Code::OracleCap,
        _ => Code::Violation,
    }
}

pub fn cmd_attack(a: AttackArgs) -> CmdResult {
    flags::require_n(a.n)?;
    if a.rounds == 0 {
        return Err(Failure::usage("--rounds must be at least 1"));
    }
    let protocol = flags::protocol(&a.protocol)?;
    let protocol = protocol
        .as_round()
        .ok_or_else(|| Failure::new(Code::UnknownProtocol, format!("{} is not a fail-to-send protocol", a.protocol)))?;
    let cap = a.cap.unwrap_or_else(|| default_cap(a.n));
    let mut out = Outputs::new(&a.common.out, "attack")?;

    let (exec, failure) = match build_nondeciding_execution(protocol.as_ref(), a.n, a.rounds, cap, a.restricted) {
        Ok(exec) => (Some(exec), None),
        Err(f) => (f.partial.map(|e| *e), Some(f.error)),
    };
    let mut verified = 0;
    let mut witnesses = 0;
    if let Some(exec) = &exec {
        out.write_trace("trace.jsonl", &exec.trace)?;
        witnesses = exec.witnesses.len();
        verified = report_execution(&mut out, protocol.as_ref(), exec, cap).map_err(|e| Failure::new(oracle_code(&e), e))?;
    }
    let rounds_built = exec.as_ref().map_or(0, |e| e.trace.steps.len());
    let outputs = exec.as_ref().map_or(0, |e| e.trace.output_count());

    let (result, code) = match &failure {
        None if verified == witnesses => ("ok", Code::Ok),
        None => ("witness re-verification failed", Code::Violation),
        Some(NondeciderError::ChainExhausted { .. }) if a.restricted => ("chain exhausted", Code::Ok),
        Some(NondeciderError::ValidityViolation { .. }) => ("no dependent initial configuration", Code::Violation),
        Some(e) => ("failed", oracle_code(e)),
    };
    let exhausted_at = match &failure {
        Some(NondeciderError::ChainExhausted { round }) => Some(*round),
        _ => None,
    };
    out.line(json!({
        "result": result,
        "protocol": protocol.id(),
        "n": a.n,
        "restricted": a.restricted,
        "rounds_requested": a.rounds,
        "rounds_built": rounds_built,
        "outputs": outputs,
        "witnesses": witnesses,
        "witnesses_verified": verified,
        "chain_exhausted_at": exhausted_at,
        "error": failure.as_ref().map(|e| e.to_string()),
    }));
    out.finish()?;

    match &failure {
        None => eprintln!(
            "built {rounds_built} non-deciding rounds against {} at n = {}; {outputs} outputs; {verified}/{witnesses} witnesses re-verified",
            protocol.id(),
            a.n
        ),
        Some(e) => eprintln!("{result}: {e} ({rounds_built} rounds built)"),
    }
    Ok(code)
}
