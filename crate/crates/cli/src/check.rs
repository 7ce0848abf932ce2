use omission_core::check::{exhaustive, fuzz, termination, CheckError, CheckReport, FuzzConfig};
use serde_json::json;

use crate::args::{CheckArgs, Mode};
use crate::exit::{CmdResult, Code, Failure};
use crate::flags;
use crate::out::Outputs;

fn check_failure(e: CheckError) -> Failure {
    match e {
        CheckError::BudgetExceeded { .. } => Failure::new(Code::Budget, e),
        _ => Failure::usage(e),
    }
}

fn single_n(a: &CheckArgs) -> Result<usize, Failure> {
    match a.n.as_slice() {
        [n] => Ok(*n),
        _ => Err(Failure::usage("this mode takes a single --n")),
    }
}

pub fn cmd_check(a: CheckArgs) -> CmdResult {
    let protocol = flags::protocol(&a.protocol)?;
    let protocol = protocol
        .as_round()
        .ok_or_else(|| Failure::new(Code::UnknownProtocol, format!("{} is not a round protocol", a.protocol)))?;
    for &n in &a.n {
        flags::require_n(n)?;
    }
    let mut out = Outputs::new(&a.common.out, "check")?;
    let (mode, report): (&str, CheckReport) = match a.mode {
        Mode::Exhaustive => {
            let n = single_n(&a)?;
            let depth = u32::try_from(a.depth).map_err(|_| Failure::usage("depth too large"))?;
            (
                "exhaustive",
                exhaustive(protocol.as_ref(), a.model, n, depth, a.restricted, a.budget).map_err(check_failure)?,
            )
        }
        Mode::Fuzz => {
            let seed = a.seed.ok_or_else(|| Failure::usage("fuzz needs --seed"))?;
            let cfg = FuzzConfig {
                model: a.model,
                ns: a.n.clone(),
                runs: a.runs,
                depth: a.depth,
                seed,
            };
            ("fuzz", fuzz(protocol.as_ref(), &cfg).map_err(check_failure)?)
        }
        Mode::Termination => (
            "termination",
            termination(protocol.as_ref(), single_n(&a)?, a.deadline).map_err(check_failure)?,
        ),
    };
    let violation = report.counterexample.as_ref();
    let trace_path = match violation {
        Some(cx) => Some(out.write_trace("trace.jsonl", &cx.trace)?),
        None => None,
    };
    out.line(json!({
        "mode": mode,
        "protocol": protocol.id(),
        "model": a.model.name(),
        "n": a.n,
        "explored": report.explored,
        "violation": violation.map(|cx| cx.violation.kind()),
        "detail": violation.map(|cx| cx.violation.to_string()),
        "trace_steps": violation.map(|cx| cx.trace.steps.len()),
    }));
    out.finish()?;
    match violation {
        None => {
            eprintln!("{mode} check of {}: {} explored, no violation", protocol.id(), report.explored);
            Ok(Code::Ok)
        }
        Some(cx) => {
            eprintln!(
                "{mode} check of {}: {} violation ({}); replayable trace at {}",
                protocol.id(),
                cx.violation.kind(),
                cx.violation,
                trace_path.expect("written above").display()
            );
            Ok(Code::Violation)
        }
    }
}
