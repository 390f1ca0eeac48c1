"""Trace, witness, certificate, and report files.

Everything is line-oriented JSON (one object per line).  A file opens with a
header record carrying the algorithm text itself, so replay needs nothing
but the file.  Step records: {i, pid, kind, reg, val, outcome, state_before,
state_after, role}; reads carry their observed value in `outcome`, writes
the written value in `val`, returns the decision in `val`.  All keys are
sorted and no timestamps exist anywhere, so identical runs serialize to
identical bytes.
"""

from __future__ import annotations

import json
from typing import Optional

from .model import (
    AlgorithmSpec,
    Configuration,
    Read,
    Return,
    Write,
    initial_configuration,
    load_algorithm,
)
from .execution import Execution, Step
from .pairs import PairLedger
from .reports import (
    Inconclusive,
    LinearChainCertificate,
    SqrtChainCertificate,
    ViolationReport,
)
from .valency import Witness


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _step_record(i: int, step: Step, config: Configuration, after: Configuration,
                 role: str) -> dict:
    action = step.action
    rec = {
        "record": "step",
        "i": i,
        "pid": step.pid,
        "kind": step.kind,
        "reg": getattr(action, "reg", None),
        "val": None,
        "outcome": step.outcome,
        "state_before": config.proc(step.pid).state,
        "state_after": None,
        "role": role,
    }
    if isinstance(action, Write):
        rec["val"] = action.value
        rec["state_after"] = action.next_state
    elif isinstance(action, Read):
        rec["state_after"] = after.proc(step.pid).state
    else:
        rec["val"] = action.decision
    return rec


def execution_lines(exec_: Execution, roles=None, start: int = 0) -> list:
    """Step records for exec_.steps[start:], replayed for state annotations."""
    roles = roles or {}
    lines = []
    config = exec_.initial
    from .model import step_with_outcome

    for i, step in enumerate(exec_.steps):
        after, _ = step_with_outcome(exec_.spec, config, step.pid, step.action)
        if i >= start:
            lines.append(_dump(_step_record(
                i, step, config, after, roles.get(step.pid, "solo"))))
        config = after
    return lines


def header_record(spec: AlgorithmSpec, initial: Configuration,
                  ledger: Optional[PairLedger] = None, extra: Optional[dict] = None) -> str:
    from .model import format_algorithm

    rec = {
        "record": "header",
        "spec": spec.name,
        "algorithm_text": format_algorithm(spec),
        "inputs": [p.input for p in initial.procs],
        "pairs": [[p.leader, p.clone] for p in ledger.pairs] if ledger else [],
    }
    rec.update(extra or {})
    return _dump(rec)


def witness_lines(witness: Witness, exec_: Execution, roles=None) -> list:
    """Wrapper record plus the witness steps relative to the execution end."""
    pids = sorted(pid for unit in witness.members for pid in unit)
    wrapper = _dump({
        "record": "witness",
        "kind": witness.kind,
        "decision": witness.decision,
        "P": pids,
        "depth": len(witness.moves),
    })
    extended = exec_.extend_steps(witness.steps)
    return [wrapper] + execution_lines(extended, roles, start=len(exec_.steps))


def _roles(ledger: Optional[PairLedger]) -> dict:
    if ledger is None:
        return {}
    roles = {}
    for p in ledger.pairs:
        roles[p.leader] = "leader"
        roles[p.clone] = "clone"
    return roles


# -- violation reports --------------------------------------------------------

def violation_lines(report: ViolationReport, ledger: Optional[PairLedger] = None) -> list:
    roles = _roles(ledger)
    lines = [header_record(report.trace.spec, report.trace.initial, ledger)]
    lines.append(_dump({
        "record": "violation",
        "kind": report.kind,
        "evidence": _jsonable(report.evidence),
        "stuck_pids": list(report.stuck_pids),
        "depth": report.depth,
        "prefix_len": report.prefix_len,
    }))
    lines.extend(execution_lines(report.trace, roles))
    if report.counter_trace is not None:
        lines.append(_dump({"record": "counter", "prefix_len": report.prefix_len}))
        lines.extend(execution_lines(report.counter_trace, roles))
    return lines


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in sorted(value.items(), key=lambda kv: str(kv[0]))}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [_jsonable(v) for v in (sorted(value) if isinstance(value, (set, frozenset)) else value)]
    return value


# -- chain certificates ---------------------------------------------------------

def sqrt_certificate_lines(cert: SqrtChainCertificate) -> list:
    top = cert.levels[-1]
    lines = [header_record(top.exec.spec, top.exec.initial, None,
                           {"attack": "sqrt", "depth": cert.depth,
                            "target_r": top.r})]
    for level in cert.levels:
        lines.append(_dump({
            "record": "level",
            "r": level.r,
            "R": sorted(level.regs),
            "budget": level.budget_used,
            "inputs": [p.input for p in level.exec.initial.procs],
        }))
        lines.extend(execution_lines(level.exec))
        lines.extend(witness_lines(level.w0, level.exec))
        lines.extend(witness_lines(level.w1, level.exec))
    return lines


def linear_certificate_lines(cert: LinearChainCertificate) -> list:
    top = cert.levels[-1]
    lines = [header_record(top.exec.spec, top.exec.initial, top.ledger,
                           {"attack": "linear", "m": cert.m, "depth": cert.depth,
                            "registers_written": cert.registers_written})]
    for level in cert.levels:
        roles = _roles(level.ledger)
        lines.append(_dump({
            "record": "level",
            "r": level.r,
            "case": level.case_tag,
            "U": list(level.pair_ids),
            "V": sorted(set(level.cover.values())),
            "L": sorted(level.stale_ids()),
            "P": list(level.p_ids),
            "Q": list(level.q_ids),
            "R_s": sorted(level.split_regs),
            "R_c": sorted(level.covered_regs),
            "pairs": [[p.leader, p.clone] for p in level.ledger.pairs],
            "inputs": [p.input for p in level.exec.initial.procs],
        }))
        lines.extend(execution_lines(level.exec, roles))
        lines.extend(witness_lines(level.alpha, level.exec, roles))
        lines.extend(witness_lines(level.beta, level.exec, roles))
    if cert.final is not None:
        lines.append(_dump({"record": "closing-block-write",
                            "registers_written": cert.registers_written}))
        lines.extend(execution_lines(cert.final, _roles(top.ledger),
                                     start=len(top.exec.steps)))
    return lines


def inconclusive_lines(spec: AlgorithmSpec, marker: Inconclusive) -> list:
    return [_dump({
        "record": "inconclusive",
        "spec": spec.name,
        "reason": marker.reason,
        "depth": marker.depth,
    })]


def write_lines(path: str, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# -- replay -------------------------------------------------------------------

class ReplayError(Exception):
    pass


def _parse_lines(text: str) -> list:
    records = []
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ReplayError(f"line {i}: not a JSON record ({e})") from None
    return records


def _steps_from_records(spec, records):
    steps = []
    for rec in records:
        kind = rec["kind"]
        state = rec["state_before"]
        action = None
        for a in spec.actions(state):
            if kind == "read" and isinstance(a, Read) and a.reg == rec["reg"] \
                    and a.target(rec["outcome"]) == rec["state_after"]:
                action = a
                break
            if kind == "write" and isinstance(a, Write) and a.reg == rec["reg"] \
                    and a.value == rec["val"] and a.next_state == rec["state_after"]:
                action = a
                break
            if kind == "return" and isinstance(a, Return) and a.decision == rec["val"]:
                action = a
                break
        if action is None:
            raise ReplayError(f"step {rec['i']}: no matching action in state {state!r}")
        steps.append(Step(rec["pid"], action, rec.get("outcome")))
    return steps


def replay_file(text: str) -> dict:
    """Re-execute a serialized certificate or report; raises ReplayError on
    any divergence.  Returns a summary dict."""
    records = _parse_lines(text)
    if not records or records[0].get("record") != "header":
        raise ReplayError("missing header record")
    header = records[0]
    spec = load_algorithm(header["algorithm_text"])
    body = records[1:]

    if any(r.get("record") == "violation" for r in body):
        return _replay_violation_records(spec, header, body)
    if any(r.get("record") == "level" for r in body):
        return _replay_certificate_records(spec, header, body)
    if body and body[0].get("record") == "inconclusive":
        return {"kind": "inconclusive", "reason": body[0]["reason"]}
    raise ReplayError("unrecognized file contents")


def _section_steps(spec, records):
    """Split flat records into (meta, step-record-list) sections."""
    sections = []
    current_meta, current = None, []
    for rec in records:
        if rec.get("record") == "step":
            current.append(rec)
        else:
            if current_meta is not None or current:
                sections.append((current_meta, current))
            current_meta, current = rec, []
    if current_meta is not None or current:
        sections.append((current_meta, current))
    return sections


def _replay_violation_records(spec, header, body):
    from .oracle import replay_violation

    sections = _section_steps(spec, body)
    vio = next(meta for meta, _ in sections if meta and meta["record"] == "violation")
    main_steps = next(steps for meta, steps in sections
                      if meta and meta["record"] == "violation")
    counter = [(meta, steps) for meta, steps in sections
               if meta and meta["record"] == "counter"]
    initial = initial_configuration(spec, header["inputs"])
    trace = Execution.from_steps(spec, initial, _steps_from_records(spec, main_steps))
    counter_trace = None
    if counter:
        counter_trace = Execution.from_steps(
            spec, initial, _steps_from_records(spec, counter[0][1]))
    report = ViolationReport(
        kind=vio["kind"], trace=trace, evidence=vio.get("evidence") or {},
        counter_trace=counter_trace, prefix_len=vio.get("prefix_len"),
        stuck_pids=tuple(vio.get("stuck_pids") or ()), depth=vio.get("depth"),
    )
    confirmed, detail = replay_violation(report)
    if not confirmed:
        raise ReplayError(f"violation not confirmed: {detail}")
    return {"kind": "violation", "category": vio["kind"], "detail": detail}


def _replay_certificate_records(spec, header, body):
    sections = _section_steps(spec, body)
    levels = 0
    checked_witnesses = 0
    exec_ = None
    for meta, steps in sections:
        if meta is None:
            continue
        if meta["record"] == "level":
            levels += 1
            initial = initial_configuration(spec, meta["inputs"])
            exec_ = Execution.from_steps(spec, initial, _steps_from_records(spec, steps))
            if header.get("attack") == "sqrt":
                want = (meta["r"] - 1) * meta["r"] // 2 + 2
                if meta["budget"] != want or len(initial.procs) != want:
                    raise ReplayError(f"level {meta['r']}: budget mismatch")
            written = exec_.written_registers()
            if not set(meta.get("R", meta.get("R_s", []) + meta.get("R_c", []))) \
                    <= set(range(spec.register_count)):
                raise ReplayError("level register set out of range")
            if header.get("attack") == "sqrt" and not set(meta["R"]) <= written:
                raise ReplayError(f"level {meta['r']}: R not fully written")
        elif meta["record"] == "witness":
            if exec_ is None:
                raise ReplayError("witness before any level")
            extended = exec_.extend_steps(_steps_from_records(spec, steps))
            last = extended.steps[-1]
            if not isinstance(last.action, Return) or last.action.decision != meta["decision"]:
                raise ReplayError("witness does not end with the claimed return")
            checked_witnesses += 1
        elif meta["record"] == "closing-block-write":
            if exec_ is None:
                raise ReplayError("closing section before any level")
            closed = exec_.extend_steps(_steps_from_records(spec, steps))
            if len(closed.written_registers()) != meta["registers_written"]:
                raise ReplayError("closing block write register count mismatch")
    if levels == 0 or checked_witnesses < 2 * levels:
        raise ReplayError("certificate is missing levels or witnesses")
    return {"kind": "certificate", "attack": header.get("attack"),
            "levels": levels, "witnesses": checked_witnesses}
