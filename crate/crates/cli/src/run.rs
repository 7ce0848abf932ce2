use std::collections::BTreeSet;

use omission_core::validate::check_colorless_outcome;
use omission_core::{Bit, ExecutionTrace, Model, ProcessId, ReceiveFault, RoundFault};
use serde_json::json;

use crate::args::{Exec, RunArgs};
use crate::exit::{CmdResult, Code, Failure};
use crate::flags::{self, outputs_json, run_sync, sync_policy, CliFault};
use crate::out::Outputs;

pub const SYNC_HORIZON: u64 = 20;
pub const ASYNC_HORIZON: u64 = 2000;

/// Consensus verdict of a finished run: `None` if fine, else the violation
/// kind and its description.
pub fn verdict(trace: &ExecutionTrace) -> Option<(&'static str, String)> {
    let inputs: BTreeSet<Bit> = trace.header.inputs.iter().copied().collect();
    let outputs: BTreeSet<Bit> = trace.outputs().into_values().collect();
    check_colorless_outcome(&inputs, &outputs).err().map(|v| {
        let kind = match v {
            omission_core::validate::ConsensusViolation::Agreement => "agreement",
            omission_core::validate::ConsensusViolation::Validity { .. } => "validity",
        };
        (kind, v.to_string())
    })
}

/// Round (or event index) of the last output written, if all `n` processes output.
fn all_decided_at(trace: &ExecutionTrace) -> Option<u64> {
    if trace.output_count() < trace.n() {
        return None;
    }
    trace.steps.iter().rposition(|s| !s.outputs.is_empty()).map(|i| i as u64 + 1)
}

/// Writes the trace, the summary line and the stderr summary of a run.
pub fn finish_run(out: &mut Outputs, trace: &ExecutionTrace, error: Option<String>, extra: serde_json::Value) -> Result<Code, Failure> {
    let path = out.write_trace("trace.jsonl", trace)?;
    let verdict = verdict(trace);
    let decided_at = all_decided_at(trace);
    let mut line = json!({
        "model": trace.model().name(),
        "protocol": trace.header.protocol,
        "n": trace.n(),
        "steps": trace.steps.len(),
        "outputs": outputs_json(&trace.outputs()),
        "all_decided_at": decided_at,
        "violation": verdict.as_ref().map(|v| v.0),
        "error": error,
    });
    if let (Some(obj), serde_json::Value::Object(extra)) = (line.as_object_mut(), extra) {
        obj.extend(extra);
    }
    out.line(line);
    out.finish()?;
    eprintln!(
        "{} steps of {} under {}; {} of {} processes output{}; trace at {}",
        trace.steps.len(),
        trace.header.protocol,
        trace.model(),
        trace.outputs().len(),
        trace.n(),
        decided_at.map_or(String::new(), |r| format!(" (all by step {r})")),
        path.display()
    );
    if let Some(e) = &error {
        eprintln!("run stopped: {e}");
    }
    if let Some((_, msg)) = &verdict {
        eprintln!("{msg}");
    }
    Ok(if verdict.is_some() || error.is_some() {
        Code::Violation
    } else {
        Code::Ok
    })
}

fn run_sync_model<F: CliFault>(out: &mut Outputs, protocol: &dyn omission_core::RoundProtocol, exec: &Exec) -> CmdResult
where
    omission_core::sync_engine::Silent: omission_core::sync_engine::AdversaryPolicy<F>,
{
    let inputs = flags::inputs(exec)?;
    let mut policy = sync_policy::<F>(exec)?;
    let run = run_sync::<F>(protocol, &inputs, policy.as_mut(), exec.horizon.unwrap_or(SYNC_HORIZON), |_| {});
    finish_run(out, &run.trace, run.error.map(|e| e.to_string()), json!({}))
}

pub fn cmd_run(a: RunArgs) -> CmdResult {
    let exec = &a.exec;
    flags::require_n(exec.n)?;
    let protocol = flags::protocol(&exec.protocol)?;
    let mut out = Outputs::new(&a.common.out, "run")?;
    let kind_error = || {
        Failure::new(
            Code::UnknownProtocol,
            format!("protocol {} cannot run in the {} model", exec.protocol, a.model),
        )
    };
    match a.model {
        Model::Fts => run_sync_model::<RoundFault>(&mut out, protocol.as_round().ok_or_else(kind_error)?.as_ref(), exec),
        Model::Ftr => run_sync_model::<ReceiveFault>(&mut out, protocol.as_round().ok_or_else(kind_error)?.as_ref(), exec),
        Model::Flp => {
            let p = protocol.as_async().ok_or_else(kind_error)?;
            let inputs = flags::inputs(exec)?;
            let run = flags::run_flp(p.as_ref(), &inputs, exec, exec.horizon.unwrap_or(ASYNC_HORIZON))?;
            let fairness = run
                .fairness
                .as_ref()
                .map(|f| json!({"window": f.window, "violations": f.violations.len()}));
            let crashed = run.final_state.crashed.map(|p: ProcessId| p.0);
            finish_run(&mut out, &run.trace, None, json!({"crashed": crashed, "fairness": fairness}))
        }
    }
}
