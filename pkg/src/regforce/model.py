"""Core model: anonymous processes over atomic read-write registers.

An algorithm is a transition system shared by every process.  Behavior
depends only on the local state and observed register values, never on a
process id; pids exist purely for scheduling.  Nondeterministic choice is
encoded as a set of actions per state (declaration order is preserved and
used for deterministic tie-breaking everywhere).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

BOTTOM = "_"  # value of a register nobody has written; never writable
DEFAULT_LABEL = "*"


class SpecError(Exception):
    """Malformed algorithm text: parse or semantic error."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "")
            where = f" ({where})"
        super().__init__(message + where)


class EngineError(Exception):
    """Internal invariant broke: replay divergence, bad bookkeeping, etc."""


class ContradictionError(EngineError):
    """A search result contradicts a machine-checked construction."""


@dataclass(frozen=True)
class Read:
    reg: int
    branches: tuple  # ((value-or-BOTTOM, next-state), ...) in declaration order
    default: Optional[str]  # None only when branches cover alphabet + BOTTOM

    def target(self, outcome: str) -> str:
        for label, state in self.branches:
            if label == outcome:
                return state
        if self.default is None:
            raise EngineError(f"read of r{self.reg}: no branch for {outcome!r} and no default")
        return self.default


@dataclass(frozen=True)
class Write:
    reg: int
    value: str
    next_state: str


@dataclass(frozen=True)
class Return:
    decision: int


Action = Union[Read, Write, Return]


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str
    alphabet: tuple
    register_count: int
    inputs: tuple  # (start state for input 0, start state for input 1)
    states: dict  # state -> tuple of Action, declaration order

    def actions(self, state: str) -> tuple:
        try:
            return self.states[state]
        except KeyError:
            raise EngineError(f"undefined state {state!r}") from None

    def action_index(self, state: str, action: Action) -> int:
        return self.actions(state).index(action)


@dataclass(frozen=True)
class Proc:
    input: int
    state: str
    decided: Optional[int] = None  # None while active

    @property
    def active(self) -> bool:
        return self.decided is None


@dataclass(frozen=True)
class Configuration:
    registers: tuple
    procs: tuple  # index == pid

    def proc(self, pid: int) -> Proc:
        if not 0 <= pid < len(self.procs):
            raise ValueError(f"unknown pid {pid}")
        return self.procs[pid]


def initial_configuration(spec: AlgorithmSpec, inputs: Sequence[int]) -> Configuration:
    if not inputs:
        raise ValueError("inputs must be nonempty")
    procs = []
    for b in inputs:
        if b not in (0, 1):
            raise ValueError(f"input must be 0 or 1, got {b!r}")
        procs.append(Proc(input=b, state=spec.inputs[b]))
    return Configuration(registers=(BOTTOM,) * spec.register_count, procs=tuple(procs))


def enabled_actions(spec: AlgorithmSpec, config: Configuration, pid: int) -> tuple:
    p = config.proc(pid)
    if not p.active:
        return ()
    return spec.actions(p.state)


def step_with_outcome(spec: AlgorithmSpec, config: Configuration, pid: int, action: Action):
    """Apply one enabled action; returns (new configuration, read outcome or None)."""
    if action not in enabled_actions(spec, config, pid):
        raise ValueError(f"action {action} not enabled for pid {pid}")
    p = config.proc(pid)
    procs = list(config.procs)
    if isinstance(action, Read):
        outcome = config.registers[action.reg]
        procs[pid] = Proc(p.input, action.target(outcome), None)
        return Configuration(config.registers, tuple(procs)), outcome
    if isinstance(action, Write):
        regs = list(config.registers)
        regs[action.reg] = action.value
        procs[pid] = Proc(p.input, action.next_state, None)
        return Configuration(tuple(regs), tuple(procs)), None
    procs[pid] = Proc(p.input, p.state, action.decision)
    return Configuration(config.registers, tuple(procs)), None


def apply_step(spec: AlgorithmSpec, config: Configuration, pid: int, action: Action) -> Configuration:
    return step_with_outcome(spec, config, pid, action)[0]


def proc_key(p: Proc) -> tuple:
    # status encoded so Active sorts apart from Returned(b)
    return (p.input, p.state, -1 if p.decided is None else p.decided)


def canonicalize(config: Configuration) -> tuple:
    """Pid-permutation-invariant form: register contents plus the multiset of
    (input, state, status) classes."""
    return (config.registers, tuple(sorted(proc_key(p) for p in config.procs)))


def restricted_canonical(config: Configuration, pids) -> tuple:
    """Canonical form over a subset of processes; valency w.r.t. a set depends
    only on this."""
    return (config.registers, tuple(sorted(proc_key(config.procs[pid]) for pid in pids)))


# ---------------------------------------------------------------------------
# Algorithm text grammar (line oriented):
#   algorithm <name>
#   values v1 v2 ...
#   registers <K>
#   input 0 -> <State>
#   input 1 -> <State>
#   state <S>: return <bit>
#   state <S>: write r<i> := <v> -> <S'>
#   state <S>: read r<i> ? { <v> -> <S'> ; ... ; * -> <Sdef> }
# Repeated `state <S>:` lines encode nondeterministic choice.  `_` names the
# unwritten-register value in branch labels; `*` is the default branch.
# Blank lines and `#` comments are ignored.
# ---------------------------------------------------------------------------

_STATE_RE = re.compile(r"^state\s+(\S+)\s*:\s*(.*)$")
_WRITE_RE = re.compile(r"^write\s+r(\d+)\s*:=\s*(\S+)\s*->\s*(\S+)$")
_READ_RE = re.compile(r"^read\s+r(\d+)\s*\?\s*\{(.*)\}$")
_RETURN_RE = re.compile(r"^return\s+([01])$")
_INPUT_RE = re.compile(r"^input\s+([01])\s*->\s*(\S+)$")
_TOKEN_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


def _check_token(tok: str, what: str, ln: int) -> str:
    if not _TOKEN_RE.match(tok):
        raise SpecError(f"bad {what} {tok!r}", ln)
    return tok


def load_algorithm(source: str) -> AlgorithmSpec:
    name = None
    alphabet: Optional[list] = None
    register_count = None
    inputs: dict = {}
    states: dict = {}

    for ln, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("algorithm"):
            if name is not None:
                raise SpecError("duplicate algorithm line", ln)
            parts = line.split()
            if len(parts) != 2:
                raise SpecError("expected: algorithm <name>", ln)
            name = _check_token(parts[1], "name", ln)
        elif line.startswith("values"):
            if alphabet is not None:
                raise SpecError("duplicate values line", ln)
            alphabet = [_check_token(t, "value", ln) for t in line.split()[1:]]
        elif line.startswith("registers"):
            if register_count is not None:
                raise SpecError("duplicate registers line", ln)
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise SpecError("expected: registers <count>", ln)
            register_count = int(parts[1])
        elif line.startswith("input"):
            m = _INPUT_RE.match(line)
            if not m:
                raise SpecError("expected: input <bit> -> <state>", ln)
            b = int(m.group(1))
            if b in inputs:
                raise SpecError(f"duplicate input {b} line", ln)
            inputs[b] = m.group(2)
        elif line.startswith("state"):
            m = _STATE_RE.match(line)
            if not m:
                raise SpecError("expected: state <name>: <action>", ln)
            sname, body = m.group(1), m.group(2).strip()
            action = _parse_action(body, ln)
            states.setdefault(sname, []).append(action)
        else:
            raise SpecError(f"unrecognized line {line.split()[0]!r}", ln, col=1)

    if name is None:
        raise SpecError("missing algorithm line")
    if register_count is None:
        raise SpecError("missing registers line")
    if alphabet is None:
        alphabet = []
    spec = AlgorithmSpec(
        name=name,
        alphabet=tuple(alphabet),
        register_count=register_count,
        inputs=(inputs.get(0), inputs.get(1)),
        states={s: tuple(a) for s, a in states.items()},
    )
    _validate(spec)
    return spec


def _parse_action(body: str, ln: int) -> Action:
    m = _RETURN_RE.match(body)
    if m:
        return Return(int(m.group(1)))
    m = _WRITE_RE.match(body)
    if m:
        return Write(reg=int(m.group(1)), value=m.group(2), next_state=m.group(3))
    m = _READ_RE.match(body)
    if m:
        branches = []
        default = None
        for part in m.group(2).split(";"):
            part = part.strip()
            if not part:
                continue
            if "->" not in part:
                raise SpecError(f"bad branch {part!r}", ln)
            label, _, target = part.partition("->")
            label, target = label.strip(), target.strip()
            if label == DEFAULT_LABEL:
                if default is not None:
                    raise SpecError("duplicate default branch", ln)
                default = target
            else:
                if any(lbl == label for lbl, _ in branches):
                    raise SpecError(f"duplicate branch label {label!r}", ln)
                branches.append((label, target))
        return Read(reg=int(m.group(1)), branches=tuple(branches), default=default)
    raise SpecError(f"unrecognized action {body!r}", ln)


def _validate(spec: AlgorithmSpec) -> None:
    seen = set()
    for v in spec.alphabet:
        if v in (BOTTOM, DEFAULT_LABEL):
            raise SpecError(f"value {v!r} is reserved")
        if v in seen:
            raise SpecError(f"duplicate value {v!r}")
        seen.add(v)
    for b in (0, 1):
        if spec.inputs[b] is None:
            raise SpecError(f"missing input {b} line")
        if spec.inputs[b] not in spec.states:
            raise SpecError(f"input {b} starts in undefined state {spec.inputs[b]!r}")
    full = set(spec.alphabet) | {BOTTOM}
    for sname, actions in spec.states.items():
        for action in actions:
            if isinstance(action, Return):
                continue
            if isinstance(action, Write):
                if not 0 <= action.reg < spec.register_count:
                    raise SpecError(f"state {sname!r}: register out of range r{action.reg}")
                if action.value == BOTTOM:
                    raise SpecError(f"state {sname!r}: cannot write the unwritten value")
                if action.value not in spec.alphabet:
                    raise SpecError(f"state {sname!r}: write of undeclared value {action.value!r}")
                if action.next_state not in spec.states:
                    raise SpecError(f"state {sname!r}: undefined state {action.next_state!r}")
                continue
            if not 0 <= action.reg < spec.register_count:
                raise SpecError(f"state {sname!r}: register out of range r{action.reg}")
            labels = set()
            for label, target in action.branches:
                if label not in full:
                    raise SpecError(f"state {sname!r}: branch on undeclared value {label!r}")
                labels.add(label)
                if target not in spec.states:
                    raise SpecError(f"state {sname!r}: undefined state {target!r}")
            if action.default is not None:
                if action.default not in spec.states:
                    raise SpecError(f"state {sname!r}: undefined state {action.default!r}")
            elif labels != full:
                missing = sorted(full - labels)
                raise SpecError(
                    f"state {sname!r}: read of r{action.reg} lacks a default and does not "
                    f"cover {missing}"
                )


def format_algorithm(spec: AlgorithmSpec) -> str:
    """Canonical text for a spec; load(format(load(x))) == load(x)."""
    out = [f"algorithm {spec.name}"]
    if spec.alphabet:
        out.append("values " + " ".join(spec.alphabet))
    out.append(f"registers {spec.register_count}")
    out.append(f"input 0 -> {spec.inputs[0]}")
    out.append(f"input 1 -> {spec.inputs[1]}")
    for sname in spec.states:
        for action in spec.states[sname]:
            if isinstance(action, Return):
                out.append(f"state {sname}: return {action.decision}")
            elif isinstance(action, Write):
                out.append(f"state {sname}: write r{action.reg} := {action.value} -> {action.next_state}")
            else:
                parts = [f"{label} -> {target}" for label, target in action.branches]
                if action.default is not None:
                    parts.append(f"* -> {action.default}")
                out.append(f"state {sname}: read r{action.reg} ? {{ " + " ; ".join(parts) + " }")
    return "\n".join(out) + "\n"
