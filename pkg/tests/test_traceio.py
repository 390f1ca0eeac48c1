import json

import pytest

from regforce import traceio
from regforce.linear_attack import linear_run
from regforce.oracle import oracle_check
from regforce.reports import ViolationReport
from regforce.sqrt_attack import sqrt_run
from regforce.execution import Execution
from regforce.model import initial_configuration


def test_sqrt_certificate_round_trip(race3):
    cert = sqrt_run(race3, 2, depth=64)
    lines = traceio.sqrt_certificate_lines(cert)
    summary = traceio.replay_file("\n".join(lines))
    assert summary == {"kind": "certificate", "attack": "sqrt",
                       "levels": 3, "witnesses": 6}


def test_linear_certificate_round_trip(flag):
    cert = linear_run(flag, m=1, depth=32)
    lines = traceio.linear_certificate_lines(cert)
    summary = traceio.replay_file("\n".join(lines))
    assert summary["kind"] == "certificate" and summary["levels"] == 2
    header = json.loads(lines[0])
    assert header["m"] == 1 and header["registers_written"] == 1
    level_recs = [json.loads(l) for l in lines if '"record":"level"' in l]
    assert [r["r"] for r in level_recs] == [0, 1]
    assert level_recs[1]["R_c"] == [0] and level_recs[1]["R_s"] == []
    assert len(level_recs[1]["U"]) == 13
    assert set(level_recs[1]["P"]).isdisjoint(level_recs[1]["Q"])


def test_violation_report_round_trip(trivial):
    out = sqrt_run(trivial, 1, depth=8)
    assert isinstance(out, ViolationReport)
    lines = traceio.violation_lines(out)
    summary = traceio.replay_file("\n".join(lines))
    assert summary["kind"] == "violation" and summary["category"] == "agreement"


def test_corrupted_certificate_is_rejected(race3):
    cert = sqrt_run(race3, 1, depth=64)
    lines = traceio.sqrt_certificate_lines(cert)
    # flip a recorded read outcome somewhere in a step record
    for i, line in enumerate(lines):
        rec = json.loads(line)
        if rec.get("record") == "step" and rec["kind"] == "read" and rec["outcome"] == "_":
            rec["outcome"] = "0"
            lines[i] = json.dumps(rec, sort_keys=True, separators=(",", ":"))
            break
    with pytest.raises(traceio.ReplayError):
        traceio.replay_file("\n".join(lines))


def test_step_records_carry_state_annotations(flag):
    verdict = oracle_check(flag, [0, 1], depth=12)
    trace = Execution.from_steps(flag, initial_configuration(flag, [0, 1]),
                                 verdict.agreement_trace)
    report = ViolationReport(kind="agreement", trace=trace)
    lines = traceio.violation_lines(report)
    steps = [json.loads(l) for l in lines if '"record":"step"' in l]
    assert steps[0]["i"] == 0
    assert all(set(r) >= {"i", "pid", "kind", "reg", "val", "outcome",
                          "state_before", "state_after", "role"} for r in steps)
    returns = [r for r in steps if r["kind"] == "return"]
    assert {r["val"] for r in returns} == {0, 1}


def test_serialization_is_deterministic(race3):
    a = traceio.sqrt_certificate_lines(sqrt_run(race3, 1, depth=64))
    b = traceio.sqrt_certificate_lines(sqrt_run(race3, 1, depth=64))
    assert a == b
