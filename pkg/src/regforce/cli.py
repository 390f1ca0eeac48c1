"""Command-line front end.

Exit codes: 0 success (oracle ok / certificate built / replay confirmed),
1 usage, parse, or semantic errors, 2 a violation was found (report written),
3 inconclusive (a depth bound or an assumption of the construction gave out).
Identical invocations produce byte-identical files and output: every knob is
a flag, nothing reads the clock or the environment.
"""

from __future__ import annotations

import argparse
import sys

from .model import EngineError, SpecError, load_algorithm
from .execution import Execution
from .model import initial_configuration
from .oracle import oracle_check
from .reports import LinearChainCertificate, SqrtChainCertificate, ViolationReport
from .sqrt_attack import sqrt_run
from .linear_attack import linear_run
from . import traceio, zoo
from .valency import valency

OK, USAGE, VIOLATION, INCONCLUSIVE = 0, 1, 2, 3


def _load_spec(path: str):
    if path.startswith("zoo:"):
        return zoo.get_zoo(path[4:])
    with open(path, "r", encoding="utf-8") as fh:
        return load_algorithm(fh.read())


def _emit(lines, out_path):
    if out_path:
        traceio.write_lines(out_path, lines)
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="regforce",
        description="drive anonymous consensus algorithms into spending "
                    "registers, or extract a replayable counterexample",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="exhaustive bounded model check")
    check.add_argument("spec")
    check.add_argument("--inputs", default="01", help="input bits, e.g. 011")
    check.add_argument("--depth", type=int, default=64)
    check.add_argument("--max-states", type=int, default=500_000)
    check.add_argument("--out", default=None)

    attack = sub.add_parser("attack", help="run an adversary")
    atsub = attack.add_subparsers(dest="attack_kind", required=True)
    sq = atsub.add_parser("sqrt", help="solo-valency chain, one clone per register")
    sq.add_argument("spec")
    sq.add_argument("--target-r", type=int, required=True)
    sq.add_argument("--depth", type=int, default=64)
    sq.add_argument("--out", default=None)
    ln = atsub.add_parser("linear", help="process-clone pair chain up to r = m")
    ln.add_argument("spec")
    ln.add_argument("--m", type=int, required=True)
    ln.add_argument("--depth", type=int, default=64)
    ln.add_argument("--out", default=None)

    val = sub.add_parser("valency", help="decision reachability of a configuration")
    val.add_argument("spec")
    val.add_argument("--trace", default=None, help="certificate/report file to replay into")
    val.add_argument("--at", type=int, default=None, help="stop after this many steps")
    val.add_argument("--inputs", default=None, help="inputs when no trace is given")
    val.add_argument("--set", dest="pidset", default=None,
                     help="comma-separated pids (default: all)")
    val.add_argument("--mode", choices=["solo", "reserving"], default="solo")
    val.add_argument("--m", type=int, default=None)
    val.add_argument("--depth", type=int, default=64)

    rp = sub.add_parser("replay", help="re-execute and confirm a certificate or report")
    rp.add_argument("file")

    zp = sub.add_parser("zoo", help="built-in algorithms")
    zsub = zp.add_subparsers(dest="zoo_cmd", required=True)
    zsub.add_parser("list")
    show = zsub.add_parser("show")
    show.add_argument("name")
    return ap


def _cmd_check(args) -> int:
    spec = _load_spec(args.spec)
    inputs = [int(c) for c in args.inputs]
    verdict = oracle_check(spec, inputs, args.depth, args.max_states)
    print(f"agreement: {verdict.agreement}")
    print(f"validity: {verdict.validity}")
    print(f"solo-termination: {verdict.solo_termination}")
    print(f"explored: {verdict.explored} truncated: {str(verdict.truncated).lower()}")
    if verdict.ok:
        return OK
    initial = initial_configuration(spec, inputs)
    report = None
    if verdict.agreement == "violated":
        trace = Execution.from_steps(spec, initial, verdict.agreement_trace)
        report = ViolationReport(kind="agreement", trace=trace)
    elif verdict.validity == "violated":
        trace = Execution.from_steps(spec, initial, verdict.validity_trace)
        report = ViolationReport(kind="validity", trace=trace)
    else:
        steps, pid = verdict.stuck
        trace = Execution.from_steps(spec, initial, steps)
        report = ViolationReport(kind="solo-termination", trace=trace,
                                 stuck_pids=(pid,), depth=args.depth)
    _emit(traceio.violation_lines(report), args.out)
    return VIOLATION


def _cmd_attack(args) -> int:
    spec = _load_spec(args.spec)
    if args.attack_kind == "sqrt":
        outcome = sqrt_run(spec, args.target_r, args.depth)
    else:
        outcome = linear_run(spec, args.m, args.depth)
    if isinstance(outcome, SqrtChainCertificate):
        _emit(traceio.sqrt_certificate_lines(outcome), args.out)
        print(f"chain complete: r={outcome.levels[-1].r}, "
              f"processes={outcome.levels[-1].budget_used}", file=sys.stderr)
        return OK
    if isinstance(outcome, LinearChainCertificate):
        _emit(traceio.linear_certificate_lines(outcome), args.out)
        print(f"chain complete: r={outcome.levels[-1].r}, "
              f"pairs={len(outcome.levels[-1].pair_ids)}, "
              f"registers written={outcome.registers_written}", file=sys.stderr)
        return OK
    if isinstance(outcome, ViolationReport):
        ledger = getattr(outcome, "ledger", None)
        _emit(traceio.violation_lines(outcome, ledger), args.out)
        print(f"violation: {outcome.kind}", file=sys.stderr)
        return VIOLATION
    print(f"inconclusive: {outcome.reason}", file=sys.stderr)
    if args.out:
        traceio.write_lines(args.out, traceio.inconclusive_lines(spec, outcome))
    return INCONCLUSIVE


def _cmd_valency(args) -> int:
    spec = _load_spec(args.spec)
    if args.trace:
        with open(args.trace, "r", encoding="utf-8") as fh:
            records = traceio._parse_lines(fh.read())
        header = records[0]
        # the first trace section: a violation's main trace, or the first
        # level execution of a certificate (levels carry their own inputs)
        meta, steps = next(((m, s) for m, s in traceio._section_steps(spec, records[1:])
                            if s), (None, []))
        inputs = (meta or {}).get("inputs") or header["inputs"]
        if args.at is not None:
            steps = steps[: args.at]
        initial = initial_configuration(spec, inputs)
        exec_ = Execution.from_steps(spec, initial,
                                     traceio._steps_from_records(spec, steps))
        config = exec_.final
    else:
        inputs = [int(c) for c in (args.inputs or "01")]
        config = initial_configuration(spec, inputs)
    if args.pidset:
        pids = [int(p) for p in args.pidset.split(",")]
    else:
        pids = list(range(len(config.procs)))
    m = args.m
    if args.mode == "reserving" and m is None:
        print("error: --mode reserving requires --m", file=sys.stderr)
        return USAGE
    report = valency(spec, config, pids, m, args.depth, args.mode)
    out = {
        "mode": args.mode,
        "set": pids,
        "m": m,
        "depth": args.depth,
        "classification": report.classify(),
        "zero": report.zero.status,
        "one": report.one.status,
    }
    import json
    print(json.dumps(out, sort_keys=True))
    if report.classify() == "unknown":
        return INCONCLUSIVE
    return OK


def _cmd_replay(args) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        text = fh.read()
    summary = traceio.replay_file(text)
    import json
    print(json.dumps(summary, sort_keys=True))
    return OK


def _cmd_zoo(args) -> int:
    if args.zoo_cmd == "list":
        for entry in zoo.list_zoo():
            print(f"{entry.name}\t{entry.intent}\t{entry.scale_notes}")
        return OK
    entry = zoo.CATALOG.get(args.name)
    if entry is None:
        print(f"error: unknown zoo algorithm {args.name!r}", file=sys.stderr)
        return USAGE
    sys.stdout.write(entry.text)
    return OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "check":
            code = _cmd_check(args)
        elif args.command == "attack":
            code = _cmd_attack(args)
        elif args.command == "valency":
            code = _cmd_valency(args)
        elif args.command == "replay":
            code = _cmd_replay(args)
        else:
            code = _cmd_zoo(args)
    except SpecError as e:
        print(f"error: {e}", file=sys.stderr)
        code = USAGE
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        code = USAGE
    except KeyError as e:
        print(f"error: {e}", file=sys.stderr)
        code = USAGE
    except traceio.ReplayError as e:
        print(f"replay error: {e}", file=sys.stderr)
        code = USAGE
    except EngineError as e:
        print(f"engine error: {e}", file=sys.stderr)
        code = USAGE
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
