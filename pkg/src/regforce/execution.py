"""Executions: step sequences with recorded read outcomes, replay validation,
block writes, written-register accounting, and trace surgery.

Executions are immutable values; every operation returns a new one.  Any
surgery (inserting shadow steps, uniting a stale pair mid-trace) rebuilds the
step list and is revalidated by a full replay - replay is the single source
of truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .model import (
    AlgorithmSpec,
    Configuration,
    EngineError,
    Proc,
    Read,
    Write,
    enabled_actions,
    step_with_outcome,
)


@dataclass(frozen=True)
class Step:
    pid: int
    action: object
    outcome: Optional[str] = None  # register value observed, reads only

    @property
    def kind(self) -> str:
        if isinstance(self.action, Read):
            return "read"
        if isinstance(self.action, Write):
            return "write"
        return "return"


class Execution:
    """An initial configuration plus a validated step sequence."""

    __slots__ = ("spec", "initial", "steps", "final")

    def __init__(self, spec: AlgorithmSpec, initial: Configuration, steps: tuple, final: Configuration):
        self.spec = spec
        self.initial = initial
        self.steps = steps
        self.final = final

    @classmethod
    def start(cls, spec: AlgorithmSpec, initial: Configuration) -> "Execution":
        return cls(spec, initial, (), initial)

    @classmethod
    def from_steps(cls, spec: AlgorithmSpec, initial: Configuration, steps: Iterable[Step]) -> "Execution":
        """Replay steps from scratch, checking enabledness and read outcomes."""
        config = initial
        out = []
        for i, step in enumerate(steps):
            config, outcome = _apply_checked(spec, config, step, i)
            out.append(Step(step.pid, step.action, outcome))
        return cls(spec, initial, tuple(out), config)

    def extend(self, pid: int, action) -> "Execution":
        config, outcome = step_with_outcome(self.spec, self.final, pid, action)
        step = Step(pid, action, outcome)
        return Execution(self.spec, self.initial, self.steps + (step,), config)

    def extend_steps(self, steps: Iterable[Step]) -> "Execution":
        """Append recorded steps, insisting their outcomes reproduce exactly."""
        exec_ = self
        for step in steps:
            exec_ = exec_.extend(step.pid, step.action)
            got = exec_.steps[-1]
            if step.outcome is not None and got.outcome != step.outcome:
                raise EngineError(
                    f"replay divergence: pid {step.pid} read {got.outcome!r}, recorded {step.outcome!r}"
                )
        return exec_

    def written_registers(self, start: int = 0, end: Optional[int] = None) -> frozenset:
        """W(e) over steps[start:end]."""
        stop = len(self.steps) if end is None else end
        return frozenset(
            s.action.reg for s in self.steps[start:stop] if isinstance(s.action, Write)
        )

    def steps_of(self, pid: int) -> tuple:
        return tuple(s for s in self.steps if s.pid == pid)

    def validate(self) -> "Execution":
        replayed = Execution.from_steps(self.spec, self.initial, self.steps)
        if replayed.final != self.final:
            raise EngineError("stored final differs from replayed final")
        for a, b in zip(replayed.steps, self.steps):
            if a != b:
                raise EngineError(f"replay divergence at step {self.steps.index(b)}")
        return self

    def __eq__(self, other):
        return (
            isinstance(other, Execution)
            and self.initial == other.initial
            and self.steps == other.steps
        )

    def __hash__(self):
        return hash((self.initial, self.steps))

    def __len__(self):
        return len(self.steps)


def _apply_checked(spec, config, step: Step, index: int):
    try:
        config, outcome = step_with_outcome(spec, config, step.pid, step.action)
    except ValueError as e:
        raise EngineError(f"replay failed at step {index}: {e}") from None
    if step.outcome is not None and outcome != step.outcome:
        raise EngineError(
            f"replay divergence at step {index}: read {outcome!r}, recorded {step.outcome!r}"
        )
    return config, outcome


def add_process(exec_: Execution, input_bit: int):
    """Grow the initial configuration by one idle process; returns (execution, pid).

    The new process takes no steps, so every recorded step replays unchanged
    and nobody else can observe the difference.
    """
    entry = Proc(input=input_bit, state=exec_.spec.inputs[input_bit])
    initial = Configuration(exec_.initial.registers, exec_.initial.procs + (entry,))
    final = Configuration(exec_.final.registers, exec_.final.procs + (entry,))
    pid = len(initial.procs) - 1
    return Execution(exec_.spec, initial, exec_.steps, final), pid


def block_write(exec_: Execution, writers: Sequence) -> Execution:
    """One write per (pid, register[, value]) entry; registers pairwise distinct.

    Each pid must be poised to write its register; with nondeterministic
    choice the first matching enabled write (declaration order) is taken,
    or the unique one matching the given value.
    """
    regs = [w[1] for w in writers]
    if len(set(regs)) != len(regs):
        raise ValueError(f"duplicate registers in block write: {sorted(regs)}")
    out = exec_
    for entry in writers:
        pid, reg = entry[0], entry[1]
        want_value = entry[2] if len(entry) > 2 else None
        action = poised_write(out, pid, reg, want_value)
        if action is None:
            raise ValueError(f"pid {pid} does not cover r{reg}" +
                             (f" with value {want_value!r}" if want_value else ""))
        out = out.extend(pid, action)
    return out


def poised_write(exec_: Execution, pid: int, reg: int, value: Optional[str] = None):
    for action in enabled_actions(exec_.spec, exec_.final, pid):
        if isinstance(action, Write) and action.reg == reg:
            if value is None or action.value == value:
                return action
    return None


def covers(spec: AlgorithmSpec, config: Configuration, pid: int, reg: int) -> bool:
    return any(
        isinstance(a, Write) and a.reg == reg
        for a in enabled_actions(spec, config, pid)
    )


def indistinguishable(c1: Configuration, c2: Configuration, who: Iterable[int]) -> bool:
    """Registers equal and every listed process has equal (state, status)."""
    if c1.registers != c2.registers:
        return False
    for pid in who:
        a, b = c1.proc(pid), c2.proc(pid)
        if (a.state, a.decided) != (b.state, b.decided):
            return False
    return True


def mirror_history(exec_: Execution, source: int, count: int, mirrors: Sequence[int],
                   marker: Optional[int] = None):
    """Insert shadow copies of the source's first `count` steps.

    Each mirror pid repeats the source's action immediately after it (mirrors
    in the given order), so reads observe the same value and writes rewrite
    the same one; the result is indistinguishable to everyone else.  Mirrors
    must exist in the initial configuration with the source's input and no
    steps of their own.  Returns the rebuilt execution (full replay is the
    validation) and, when `marker` is a step index, its shifted position.
    """
    src_proc = exec_.initial.proc(source)
    for m in mirrors:
        p = exec_.initial.proc(m)
        if p.input != src_proc.input or p != Proc(p.input, exec_.spec.inputs[p.input]):
            raise EngineError(f"mirror pid {m} is not a fresh process of input {src_proc.input}")
        if exec_.steps_of(m):
            raise EngineError(f"mirror pid {m} has already taken steps")
    new_steps = []
    new_marker = marker
    copied = 0
    for i, step in enumerate(exec_.steps):
        new_steps.append(step)
        if step.pid == source and copied < count:
            for m in mirrors:
                new_steps.append(Step(m, step.action, step.outcome))
            if marker is not None and i < marker:
                new_marker += len(mirrors)
            copied += 1
    if copied < count:
        raise EngineError(f"source pid {source} has only {copied} steps, wanted {count}")
    rebuilt = Execution.from_steps(exec_.spec, exec_.initial, new_steps)
    return (rebuilt, new_marker) if marker is not None else rebuilt


def insert_step(exec_: Execution, index: int, pid: int, action) -> Execution:
    """Splice a single step into the trace; revalidated by full replay."""
    steps = exec_.steps[:index] + (Step(pid, action),) + exec_.steps[index:]
    return Execution.from_steps(exec_.spec, exec_.initial, steps)
