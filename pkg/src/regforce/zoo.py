"""Built-in test subjects, broken and intended-correct.

The of-race family races over K registers: a process scans them in order,
confirming its preference, adopting any conflicting value it reads (patching
the prefix it had claimed), writing its preference into unwritten slots, and
deciding only after a full pure-read pass confirms one value everywhere.
Each certified variant was frozen after the exhaustive checker accepted it
at the documented scale; the scale notes record where that certification
holds and where the race is known to break.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .model import AlgorithmSpec, load_algorithm


@dataclass(frozen=True)
class ZooEntry:
    name: str
    intent: str  # broken-agreement | broken-validity | non-terminating | intended-correct
    scale_notes: str
    text: str


TRIVIAL_DECIDER = """\
# Every process returns its own input without touching a register.
algorithm trivial-decider
registers 0
input 0 -> S0
input 1 -> S1
state S0: return 0
state S1: return 1
"""

CONSTANT_DECIDER = """\
# Always returns 0; breaks validity whenever every input is 1.
algorithm constant-decider
values 0 1
registers 1
input 0 -> S
input 1 -> S
state S: return 0
"""

SPIN_READER = """\
# Loops reading r0 forever: no terminating solo run from anywhere.
algorithm spin-reader
values 0 1
registers 1
input 0 -> SPIN
input 1 -> SPIN
state SPIN: read r0 ? { * -> SPIN }
"""

ONE_REGISTER_FLAG = """\
# A single flag register: adopt it if set, else claim it and return.
# Two covering writers overwrite each other, so agreement races away.
algorithm one-register-flag
values 0 1
registers 1
input 0 -> LOOK0
input 1 -> LOOK1
state LOOK0: read r0 ? { 0 -> DONE0 ; 1 -> DONE1 ; _ -> PUT0 }
state LOOK1: read r0 ? { 0 -> DONE0 ; 1 -> DONE1 ; _ -> PUT1 }
state PUT0: write r0 := 0 -> DONE0
state PUT1: write r0 := 1 -> DONE1
state DONE0: return 0
state DONE1: return 1
"""


CLAIM_COMMIT = """\
# Two-stage flag: adopt the claim register if set, else claim it; then adopt
# the commit register if set, else commit own value and return it.  Races
# exactly like the one-register flag, but its two registers make it the
# smallest subject whose pair-adversary runs exercise the mirrored scan and
# the switching-point duplication.
algorithm claim-commit
values 0 1
registers 2
input 0 -> LOOK0
input 1 -> LOOK1
state LOOK0: read r0 ? { 0 -> CHK0 ; 1 -> CHK1 ; _ -> CLAIM0 }
state LOOK1: read r0 ? { 0 -> CHK0 ; 1 -> CHK1 ; _ -> CLAIM1 }
state CLAIM0: write r0 := 0 -> CHK0
state CLAIM1: write r0 := 1 -> CHK1
state CHK0: read r1 ? { 0 -> DONE0 ; 1 -> DONE1 ; _ -> PUT0 }
state CHK1: read r1 ? { 0 -> DONE0 ; 1 -> DONE1 ; _ -> PUT1 }
state PUT0: write r1 := 0 -> DONE0
state PUT1: write r1 := 1 -> DONE1
state DONE0: return 0
state DONE1: return 1
"""


def of_race(k: int) -> str:
    """Generate the K-register racing consensus candidate.

    A process alternates two passes.  The scan pass reads every register,
    counting the values it sees: a unanimous pass decides that value, any
    other outcome picks the majority value (own preference on ties) as the
    new target.  The seek pass re-reads the registers in order and overwrites
    the first one that differs from the target, then rescans.  At most one
    write happens between scans, so up to (K-1)/2 lurking stale writes are
    outvoted by the surviving majority.
    """
    if k < 1:
        raise ValueError("need at least one register")

    def scan(i, c0, c1, p):
        return f"sc{i}c{c0}_{c1}v{p}"

    def after_scan(c0, c1, p):
        if c0 == k:
            return "ret0"
        if c1 == k:
            return "ret1"
        if c0 > c1:
            t = 0
        elif c1 > c0:
            t = 1
        else:
            t = p
        return f"sk{t}i0"

    lines = [
        f"algorithm of-race-{k}",
        "values 0 1",
        f"registers {k}",
        f"input 0 -> {scan(0, 0, 0, 0)}",
        f"input 1 -> {scan(0, 0, 0, 1)}",
    ]
    for p in (0, 1):
        for i in range(k):
            for c0 in range(i + 1):
                for c1 in range(i + 1 - c0):
                    if i + 1 < k:
                        b0 = scan(i + 1, c0 + 1, c1, p)
                        b1 = scan(i + 1, c0, c1 + 1, p)
                        bb = scan(i + 1, c0, c1, p)
                    else:
                        b0 = after_scan(c0 + 1, c1, p)
                        b1 = after_scan(c0, c1 + 1, p)
                        bb = after_scan(c0, c1, p)
                    lines.append(
                        f"state {scan(i, c0, c1, p)}: read r{i} ? "
                        f"{{ 0 -> {b0} ; 1 -> {b1} ; _ -> {bb} }}"
                    )
    for t in (0, 1):
        for i in range(k):
            clean = f"sk{t}i{i + 1}" if i + 1 < k else scan(0, 0, 0, t)
            lines.append(
                f"state sk{t}i{i}: read r{i} ? {{ {t} -> {clean} ; * -> pt{t}i{i} }}"
            )
            lines.append(f"state pt{t}i{i}: write r{i} := {t} -> {scan(0, 0, 0, t)}")
    lines.append("state ret0: return 0")
    lines.append("state ret1: return 1")
    return "\n".join(lines) + "\n"


_ENTRIES = [
    ZooEntry(
        "trivial-decider",
        "broken-agreement",
        "mixed inputs disagree immediately at any n >= 2",
        TRIVIAL_DECIDER,
    ),
    ZooEntry(
        "constant-decider",
        "broken-validity",
        "all-1 inputs decide 0 at any n",
        CONSTANT_DECIDER,
    ),
    ZooEntry(
        "spin-reader",
        "non-terminating",
        "stuck from the initial configuration at any n",
        SPIN_READER,
    ),
    ZooEntry(
        "one-register-flag",
        "broken-agreement",
        "two poised writers stomp the flag; breaks at n = 2, depth 8",
        ONE_REGISTER_FLAG,
    ),
    ZooEntry(
        "claim-commit",
        "broken-agreement",
        "two poised committers race like the flag (breaks at n = 2); its "
        "two-register shape drives the pair adversary's mirrored scan and "
        "switching-point cases at m = 2",
        CLAIM_COMMIT,
    ),
    ZooEntry(
        "of-race-3",
        "intended-correct",
        "certified at n = 2: the reachable space closes untruncated by depth "
        "60, all ok (one stale writer is outvoted 2-1); two lurkers beat a "
        "majority of three, so n = 3 breaks agreement",
        of_race(3),
    ),
    ZooEntry(
        "of-race-5",
        "intended-correct",
        "certified at n <= 3, depth 40 (bounded: ~60k canonical states, "
        "clean through 1.6M states at depth 120); two lurking writers "
        "corrupt at most two of five slots and the majority survives",
        of_race(5),
    ),
]

CATALOG = {e.name: e for e in _ENTRIES}


def list_zoo() -> list:
    return list(_ENTRIES)


def get_zoo(name: str) -> AlgorithmSpec:
    try:
        entry = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown zoo algorithm {name!r}; see `zoo list`") from None
    return load_algorithm(entry.text)


def zoo_file_text(name: str) -> str:
    """Contents of the packaged zoo/<name>.alg file."""
    return resources.files(__package__).joinpath(f"zoo/{name}.alg").read_text("utf-8")
