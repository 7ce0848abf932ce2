use omission_core::validate::{validate_trace, ValidationError};
use omission_core::ExecutionTrace;
use serde_json::json;

use crate::args::ValidateArgs;
use crate::exit::{CmdResult, Code, Failure};
use crate::out::Outputs;

/// Replays the trace and writes the replay next to the report; a valid trace
/// replays to a byte-identical file.
pub fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.trace).map_err(|e| Failure::new(Code::Trace, format!("{}: {e}", a.trace.display())))?;
    let trace = ExecutionTrace::from_jsonl(&text).map_err(|e| Failure::new(Code::Trace, format!("{}: {e}", a.trace.display())))?;
    let report = validate_trace(&trace).map_err(|e| match e {
        ValidationError::Protocol(_) => Failure::new(Code::UnknownProtocol, e),
        ValidationError::KindMismatch { .. } => Failure::new(Code::Trace, e),
    })?;
    let mut out = Outputs::new(&a.common.out, "validate")?;
    let replay = out.write_trace("trace.jsonl", &report.replayed)?;
    let issues: Vec<String> = report.issues.iter().map(|i| i.to_string()).collect();
    out.line(json!({
        "trace": a.trace.display().to_string(),
        "model": trace.model().name(),
        "protocol": trace.header.protocol,
        "steps": trace.steps.len(),
        "valid": report.is_valid(),
        "issues": issues,
    }));
    out.finish()?;
    if report.is_valid() {
        eprintln!(
            "{}: {} steps replay exactly; replay at {}",
            a.trace.display(),
            trace.steps.len(),
            replay.display()
        );
        Ok(Code::Ok)
    } else {
        for issue in &issues {
            eprintln!("{}: {issue}", a.trace.display());
        }
        Ok(Code::Trace)
    }
}
