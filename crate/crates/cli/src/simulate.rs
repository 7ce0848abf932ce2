use omission_core::simulations::{delivery_ledger, late_deliveries, project, GetCore, Stack};
use omission_core::sync_engine::{silences_someone, AdversaryPolicy, Silent};
use omission_core::{AnyProtocol, Configuration, Model, ReceiveFault, RoundFault, StepEvent};
use serde_json::{json, Value};

use crate::args::SimulateArgs;
use crate::exit::{CmdResult, Code, Failure};
use crate::flags::{self, fault_json, run_sync, sync_policy, CliFault};
use crate::out::Outputs;
use crate::run::{finish_run, ASYNC_HORIZON};

/// Piggyback delivery bound, in real rounds, when no round fully silences a
/// sender.
const DELIVERY_BOUND: u64 = 2;

fn sync_stack<F: CliFault>(out: &mut Outputs, stack: &Stack, wrapped: &dyn omission_core::RoundProtocol, a: &SimulateArgs) -> CmdResult
where
    Silent: AdversaryPolicy<F>,
{
    let exec = &a.exec;
    let inputs = flags::inputs(exec)?;
    let mut policy = sync_policy::<F>(exec)?;
    let n = exec.n;
    let mut checks = Vec::new();
    let mut failed = false;
    let get_core_bottom = stack.simulated() == Model::Fts && stack.bottom() == Model::Ftr;
    let mut observe = |c: &Configuration| {
        if !get_core_bottom {
            return;
        }
        match GetCore::simulated_round(c) {
            Ok(Some(r)) => {
                let ok = r.core.len() + 1 >= n;
                failed |= !ok;
                checks.push(json!({
                    "sim_round": r.round,
                    "core_size": r.core.len(),
                    "core": r.core.iter().map(|p| p.0).collect::<Vec<_>>(),
                    "fault": r.classify().ok().map(|f| fault_json(&f)),
                    "ok": ok,
                }));
            }
            Ok(None) => {}
            Err(e) => {
                failed = true;
                checks.push(json!({"error": e.to_string()}));
            }
        }
    };
    let default_horizon = if get_core_bottom { 18 } else { 30 };
    let run = run_sync::<F>(
        wrapped,
        &inputs,
        policy.as_mut(),
        exec.horizon.unwrap_or(default_horizon),
        &mut observe,
    );
    let mut extra = json!({"stack": stack.to_string()});
    if get_core_bottom {
        extra["core_sets"] = Value::Array(checks);
        eprintln!(
            "get-core: {} simulated rounds, all cores of size >= n-1: {}",
            extra["core_sets"].as_array().map_or(0, Vec::len),
            !failed
        );
    }
    if stack.simulated() == Model::Flp {
        let (ledger_json, late) = piggyback_report(&run.final_config, &run.trace)?;
        extra["ledger"] = ledger_json;
        failed |= late;
    }
    let code = finish_run(out, &run.trace, run.error.map(|e| e.to_string()), extra)?;
    Ok(if failed { Code::Violation } else { code })
}

/// Delivery ledger, and whether the delivery bound was broken although no
/// round fully silenced a sender.
fn piggyback_report(config: &Configuration, trace: &omission_core::ExecutionTrace) -> Result<(Value, bool), Failure> {
    let ledger = delivery_ledger(config).map_err(|e| Failure::new(Code::Violation, e))?;
    let n = trace.n();
    let last_round = trace.steps.len() as u64;
    let silencing = trace.steps.iter().any(|s| match &s.event {
        StepEvent::Ftr { .. } => s.event.to_receive_fault(n).map_or(true, |f| silences_someone(&f, n)),
        _ => false,
    });
    let late = late_deliveries(&ledger, DELIVERY_BOUND, last_round);
    let entries: Vec<Value> = ledger
        .iter()
        .map(|e| json!({"from": e.id.from.0, "seq": e.id.seq, "to": e.to.0, "sent": e.sent_round, "delivered": e.delivered_round}))
        .collect();
    eprintln!(
        "piggyback: {} simulated messages, {} delivered, {} beyond {DELIVERY_BOUND} rounds{}",
        ledger.len(),
        ledger.iter().filter(|e| e.delivered_round.is_some()).count(),
        late.len(),
        if silencing {
            " (adversary silenced a sender at least once)"
        } else {
            ""
        }
    );
    let broken = !silencing && !late.is_empty();
    Ok((
        json!({"entries": entries, "late": late.len(), "silencing_adversary": silencing, "bound_holds": !broken}),
        broken,
    ))
}

pub fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let exec = &a.exec;
    flags::require_n(exec.n)?;
    let stack: Stack = a.stack.parse().map_err(Failure::usage)?;
    let protocol = flags::protocol(&exec.protocol)?;
    let wrapped = stack.wrap(protocol.clone()).map_err(|e| Failure::new(Code::UnknownProtocol, e))?;
    let mut out = Outputs::new(&a.common.out, "simulate")?;
    match (stack.bottom(), &wrapped) {
        (Model::Ftr, AnyProtocol::Round(p)) => sync_stack::<ReceiveFault>(&mut out, &stack, p.as_ref(), &a),
        (Model::Fts, AnyProtocol::Round(p)) => sync_stack::<RoundFault>(&mut out, &stack, p.as_ref(), &a),
        (Model::Flp, AnyProtocol::Async(p)) => {
            let inputs = flags::inputs(exec)?;
            let run = flags::run_flp(p.as_ref(), &inputs, exec, exec.horizon.unwrap_or(ASYNC_HORIZON))?;
            // the synchronizer's inner protocol is the rest of the stack
            let inner = match stack.upper() {
                Some(upper) => upper.wrap(protocol).map_err(|e| Failure::new(Code::UnknownProtocol, e))?,
                None => protocol,
            };
            let inner = inner.as_round().expect("ftr-over-flp wraps a round protocol").clone();
            let proj = project(&run.final_state, inner.as_ref()).map_err(|e| Failure::new(Code::Violation, e))?;
            let proj_path = out.write_trace("projection.jsonl", &proj.trace)?;
            let faithful = proj.is_faithful();
            eprintln!(
                "synchronizer: {} simulated rounds completed by every survivor, crashed {:?}, projection faithful: {faithful}; projection at {}",
                proj.rounds,
                proj.crashed.map(|p| p.0),
                proj_path.display()
            );
            let extra = json!({
                "stack": stack.to_string(),
                "crashed": run.final_state.crashed.map(|p| p.0),
                "projection": {
                    "rounds": proj.rounds,
                    "faithful": faithful,
                    "state_mismatches": proj.state_mismatches.iter().map(|(r, p)| json!([r, p.0])).collect::<Vec<_>>(),
                    "issues": proj.validation.issues.iter().map(|i| i.to_string()).collect::<Vec<_>>(),
                },
            });
            let code = finish_run(&mut out, &run.trace, None, extra)?;
            Ok(if faithful { code } else { Code::Violation })
        }
        _ => unreachable!("stack wrapping yields the bottom model's protocol kind"),
    }
}
