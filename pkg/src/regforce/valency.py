"""Bounded searches for terminating solo and reserving executions, and the
decision-reachability (valency) classification built on them.

All searches are exhaustive depth-first over scheduling and nondeterministic
choice, in lexicographic (pid, action-index) order, so the first witness
found is the least one and repeated runs are identical.  Results are
three-valued: proven (with a replayable witness), refuted (the bounded space
was exhausted with no cutoff), or unknown (a depth cutoff was hit).

Searches operate on *units*: a unit is one pid, or a process-clone pair that
moves in lockstep and counts as a single process.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

from .model import (
    AlgorithmSpec,
    Configuration,
    EngineError,
    Return,
    Write,
    step_with_outcome,
)
from .execution import Step


class InconclusiveError(Exception):
    """A search hit its depth bound (or an assumption of the construction
    failed to hold); the surrounding run cannot conclude either way."""

    def __init__(self, reason: str, breach=None):
        super().__init__(reason)
        self.reason = reason
        # (config, unit) when the search proved no terminating solo exists:
        # that is a solo-termination breach, not a mere cutoff.
        self.breach = breach


Unit = tuple  # (pid,) or (leader_pid, clone_pid)


@dataclass(frozen=True)
class Witness:
    kind: str  # "solo" | "reserving"
    members: tuple  # units permitted to move
    moves: tuple  # ((unit, action), ...)
    steps: tuple  # materialized Steps from the root configuration
    decision: int

    @property
    def decider(self) -> Unit:
        return self.moves[-1][0]

    def move_keys(self, spec: AlgorithmSpec, config: Configuration):
        # for lexicographic comparison in tests
        keys = []
        cfg = config
        for unit, action in self.moves:
            state = cfg.proc(unit[0]).state
            keys.append((unit, spec.action_index(state, action)))
            cfg = _apply_move(spec, cfg, unit, action)[0]
        return tuple(keys)


@dataclass(frozen=True)
class Tri:
    status: str  # "proven" | "refuted" | "unknown"
    witness: Optional[Witness] = None
    depth: Optional[int] = None

    @property
    def proven(self):
        return self.status == "proven"

    @property
    def refuted(self):
        return self.status == "refuted"


@dataclass(frozen=True)
class ValencyReport:
    zero: Tri
    one: Tri
    mode: str  # "solo" | "reserving"
    units: tuple
    m: Optional[int]
    depth: int

    def side(self, decision: int) -> Tri:
        return self.zero if decision == 0 else self.one

    def classify(self) -> str:
        z, o = self.zero, self.one
        if z.proven and o.proven:
            return "bivalent"
        if z.proven and o.refuted:
            return "0-univalent"
        if o.proven and z.refuted:
            return "1-univalent"
        if z.refuted and o.refuted:
            return "degenerate"
        return "unknown"


def unit_state(config: Configuration, unit: Unit) -> tuple:
    """(state, decided) of a unit; members of a pair must agree."""
    first = config.proc(unit[0])
    for pid in unit[1:]:
        p = config.proc(pid)
        if (p.state, p.decided) != (first.state, first.decided):
            raise EngineError(f"unit {unit} members out of sync")
    return (first.state, first.decided)


def unit_active(config: Configuration, unit: Unit) -> bool:
    return unit_state(config, unit)[1] is None


def _apply_move(spec: AlgorithmSpec, config: Configuration, unit: Unit, action):
    """Each member performs the action back to back; returns (config, steps)."""
    steps = []
    outcome0 = None
    for i, pid in enumerate(unit):
        config, outcome = step_with_outcome(spec, config, pid, action)
        steps.append(Step(pid, action, outcome))
        if i == 0:
            outcome0 = outcome
        elif outcome != outcome0:
            raise EngineError(f"lockstep outcome divergence in unit {unit}")
    return config, steps


def unit_covers(spec: AlgorithmSpec, config: Configuration, unit: Unit, reg: int) -> bool:
    state, decided = unit_state(config, unit)
    if decided is not None:
        return False
    return any(isinstance(a, Write) and a.reg == reg for a in spec.actions(state))


def covered_injectively(spec: AlgorithmSpec, config: Configuration, units, regs) -> Optional[dict]:
    """Injective assignment register -> covering unit, or None.

    Simple augmenting-path matching; both sides stay tiny here.
    """
    regs = sorted(regs)
    match: dict = {}

    def augment(reg, seen):
        for unit in units:
            if unit in seen or not unit_covers(spec, config, unit, reg):
                continue
            seen.add(unit)
            if unit not in match or augment(match[unit], seen):
                match[unit] = reg
                return True
        return False

    for reg in regs:
        if not augment(reg, set()):
            return None
    return {reg: unit for unit, reg in match.items()}


class _Search:
    """One exhaustive DFS for a target decision (or any termination)."""

    def __init__(self, spec, units, target, coverage, m):
        self.spec = spec
        self.units = sorted(units)
        self.target = target
        self.coverage = coverage
        self.m = m
        self.memo: dict = {}
        self.cutoff = False
        self.found: Optional[tuple] = None

    def run(self, config: Configuration, depth: int):
        for unit in self.units:
            if not unit_active(config, unit):
                raise ValueError(f"unit {unit} already returned")
        self._dfs(config, frozenset(), depth, [])
        return self.found, self.cutoff

    def _key(self, config, written):
        return (
            tuple(config.proc(u[0]).state for u in self.units),
            config.registers,
            written,
        )

    def _dfs(self, config, written, budget, path):
        if self.found is not None:
            return
        key = self._key(config, written)
        if self.memo.get(key, -1) >= budget:
            return
        self.memo[key] = budget
        for unit in self.units:
            state, decided = unit_state(config, unit)
            if decided is not None:
                continue
            for action in self.spec.actions(state):
                if budget <= 0:
                    self.cutoff = True
                    return
                if isinstance(action, Return):
                    if self.target is not None and action.decision != self.target:
                        continue
                    cfg2, _ = _apply_move(self.spec, config, unit, action)
                    if self.coverage and covered_injectively(
                            self.spec, cfg2, self.units, written) is None:
                        continue
                    self.found = tuple(path + [(unit, action)])
                    return
                cfg2, _ = _apply_move(self.spec, config, unit, action)
                written2 = written
                if isinstance(action, Write):
                    written2 = written | {action.reg}
                if self.coverage and covered_injectively(
                        self.spec, cfg2, self.units, written2) is None:
                    continue
                path.append((unit, action))
                self._dfs(cfg2, written2, budget - 1, path)
                path.pop()
                if self.found is not None:
                    return


def materialize(spec: AlgorithmSpec, config: Configuration, moves) -> tuple:
    steps = []
    for unit, action in moves:
        config, s = _apply_move(spec, config, unit, action)
        steps.extend(s)
    return tuple(steps)


def _witness(spec, config, moves, members, kind) -> Witness:
    steps = materialize(spec, config, moves)
    last = moves[-1][1]
    if not isinstance(last, Return):
        raise EngineError("witness does not end with a return")
    return Witness(kind=kind, members=tuple(sorted(members)), moves=tuple(moves),
                   steps=steps, decision=last.decision)


@dataclass(frozen=True)
class SoloResult:
    zero: Tri
    one: Tri
    any_witness: Optional[Witness]  # lexicographically least terminating run
    cutoff: bool


def solo_search(spec: AlgorithmSpec, config: Configuration, unit, depth: int) -> SoloResult:
    """All decisions reachable by terminating solo runs of one unit."""
    unit = _as_unit(unit)
    if not unit_active(config, unit):
        return SoloResult(Tri("refuted"), Tri("refuted"), None, False)
    tris = {}
    firsts = {}
    any_cut = False
    for d in (0, 1):
        search = _Search(spec, [unit], d, coverage=False, m=None)
        moves, cut = search.run(config, depth)
        any_cut = any_cut or cut
        if moves is not None:
            w = _witness(spec, config, moves, [unit], "solo")
            tris[d] = Tri("proven", w)
            firsts[d] = w
        elif cut:
            tris[d] = Tri("unknown", depth=depth)
        else:
            tris[d] = Tri("refuted")
    any_w = _lex_min(spec, config, [w for w in firsts.values()])
    return SoloResult(tris[0], tris[1], any_w, any_cut)


def _lex_min(spec, config, witnesses):
    if not witnesses:
        return None
    return min(witnesses, key=lambda w: w.move_keys(spec, config))


def solo_terminating(spec, config, unit, depth: int) -> Optional[Witness]:
    """Least terminating solo run, or None; raises when only a cutoff blocks."""
    res = solo_search(spec, config, unit, depth)
    if res.any_witness is not None:
        return res.any_witness
    if res.cutoff:
        raise InconclusiveError(f"no terminating solo run of {unit} within depth")
    return None


def _as_unit(unit) -> Unit:
    if isinstance(unit, int):
        return (unit,)
    return tuple(unit)


def reserving_search(spec, config, units, m, depth, target) -> tuple:
    """(moves or None, cutoff) for Res(config, units) ending with `target`
    (any return when target is None)."""
    units = [_as_unit(u) for u in units]
    if len(units) < m + 1:
        raise ValueError(f"need at least m+1={m + 1} units, got {len(units)}")
    search = _Search(spec, units, target, coverage=True, m=m)
    return search.run(config, depth)


def is_reserving(spec, config, units, steps, m) -> bool:
    """Check the reserving-interval conditions for a recorded step sequence."""
    units = sorted(_as_unit(u) for u in units)
    if len(units) < m + 1:
        return False
    moves = group_moves(units, steps)
    if moves is None:
        return False
    written = set()
    cfg = config
    for i, (unit, action) in enumerate(moves):
        if isinstance(action, Return) and i != len(moves) - 1:
            return False
        try:
            cfg, _ = _apply_move(spec, cfg, unit, action)
        except (ValueError, EngineError):
            raise EngineError("reserving check: trace does not replay")
        if isinstance(action, Write):
            written.add(action.reg)
        if covered_injectively(spec, cfg, units, written) is None:
            return False
    return True


def group_moves(units, steps) -> Optional[list]:
    """Group raw steps into unit moves (pair members must act back to back)."""
    by_pid = {}
    for u in units:
        for pid in u:
            by_pid[pid] = u
    moves = []
    i = 0
    steps = list(steps)
    while i < len(steps):
        s = steps[i]
        unit = by_pid.get(s.pid)
        if unit is None:
            return None
        if len(unit) == 1:
            moves.append((unit, s.action))
            i += 1
            continue
        if s.pid != unit[0] or i + 1 >= len(steps):
            return None
        t = steps[i + 1]
        if t.pid != unit[1] or t.action != s.action:
            return None
        moves.append((unit, s.action))
        i += 2
    return moves


# -- valency ----------------------------------------------------------------

# caches are grouped per algorithm object; the table holds a strong reference
# to each spec, so ids can never be recycled under us
_caches: dict = {}


def clear_caches():
    _caches.clear()


def _spec_cache(spec) -> dict:
    entry = _caches.get(id(spec))
    if entry is None or entry[0] is not spec:
        entry = (spec, {"profile": {}, "query": {}})
        _caches[id(spec)] = entry
    return entry[1]


def _profile_key(config, units, m, depth, target):
    states = tuple(sorted(config.proc(u[0]).state for u in units))
    return (config.registers, states, m, depth, target)


def _subset_search(spec, config, units, m, depth, target):
    """Reserving search memoized on the anonymity profile of the subset:
    subsets whose members sit in the same multiset of states share results."""
    units = sorted(units)
    memo = _spec_cache(spec)["profile"]
    key = _profile_key(config, units, m, depth, target)
    hit = memo.get(key)
    if hit is not None:
        tag, payload = hit
        if tag == "proven":
            moves = _rebind_moves(config, payload, units)
            return moves, False
        return None, tag == "unknown"
    moves, cut = reserving_search(spec, config, units, m, depth, target)
    if moves is not None:
        order = _profile_order(config, units)
        stored = tuple((order.index(u), a) for u, a in moves)
        memo[key] = ("proven", stored)
    else:
        memo[key] = ("unknown" if cut else "refuted", None)
    return moves, cut


def _profile_order(config, units):
    return sorted(units, key=lambda u: (config.proc(u[0]).state, u))


def _rebind_moves(config, stored, units):
    order = _profile_order(config, units)
    return [(order[pos], action) for pos, action in stored]


def valency(spec, config, units, m, depth, mode) -> ValencyReport:
    """Decision reachability from a configuration.

    solo mode: a decision is proven when some unit of `units` has a
    terminating solo run returning it.  reserving mode: when some subset of
    exactly m+1 active units has a reserving execution returning it.
    Queries are cached per algorithm on the canonical form restricted to the
    queried units: nothing else can affect the answer.
    """
    units = tuple(sorted(_as_unit(u) for u in units))
    # the per-unit state list keeps witnesses attached to the right pids;
    # cross-permutation sharing happens inside the subset-profile memo
    states = tuple(unit_state(config, u) for u in units)
    query_key = (mode, m, depth, units, config.registers, states)
    cache = _spec_cache(spec)["query"]
    hit = cache.get(query_key)
    if hit is not None:
        return hit
    report = _valency_uncached(spec, config, units, m, depth, mode)
    cache[query_key] = report
    return report


def _valency_uncached(spec, config, units, m, depth, mode) -> ValencyReport:
    tris = {}
    if mode == "solo":
        for d in (0, 1):
            witness = None
            cutoff = False
            for unit in units:
                if not unit_active(config, unit):
                    continue
                search = _Search(spec, [unit], d, coverage=False, m=None)
                moves, cut = search.run(config, depth)
                cutoff = cutoff or cut
                if moves is not None:
                    witness = _witness(spec, config, moves, [unit], "solo")
                    break
            if witness is not None:
                tris[d] = Tri("proven", witness)
            elif cutoff:
                tris[d] = Tri("unknown", depth=depth)
            else:
                tris[d] = Tri("refuted")
    elif mode == "reserving":
        active = [u for u in units if unit_active(config, u)]
        for d in (0, 1):
            witness = None
            cutoff = False
            if len(active) >= m + 1:
                for subset in itertools.combinations(active, m + 1):
                    moves, cut = _subset_search(spec, config, list(subset), m, depth, d)
                    cutoff = cutoff or cut
                    if moves is not None:
                        witness = _witness(spec, config, moves, list(subset), "reserving")
                        break
            if witness is not None:
                tris[d] = Tri("proven", witness)
            elif cutoff:
                tris[d] = Tri("unknown", depth=depth)
            else:
                tris[d] = Tri("refuted")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ValencyReport(zero=tris[0], one=tris[1], mode=mode, units=units, m=m, depth=depth)


def require_known(report: ValencyReport, what: str) -> str:
    cls = report.classify()
    if cls == "unknown":
        raise InconclusiveError(f"valency of {what} unknown at depth {report.depth}")
    return cls


# -- the constructive reserving procedure -----------------------------------

@dataclass
class ReservingConstruction:
    witness: Witness
    stage2_iterations: int


def construct_reserving(spec, config, units, m, depth) -> ReservingConstruction:
    """Build a reserving execution ending in a return, by the two-stage walk:
    first every unit advances read-only to its first pending write, then
    repeatedly two units covering a common register are found and one of them
    advances to its first write outside the covered set, until some unit's
    terminating run stays inside it.  Covered registers grow strictly, so at
    most m extensions happen when no execution writes more than m registers.
    """
    units = sorted(_as_unit(u) for u in units)
    if len(units) < m + 1:
        raise ValueError(f"need at least m+1={m + 1} units")
    for u in units:
        if not unit_active(config, u):
            raise ValueError(f"unit {u} already returned")

    moves: list = []
    cfg = config
    pending: dict = {}

    def probe(unit):
        w = solo_terminating(spec, cfg, unit, depth)
        if w is None:
            raise InconclusiveError(
                f"unit {unit} has no terminating solo run (solo-termination breach)",
                breach=(tuple(moves), unit),
            )
        return w

    def take(unit, ms):
        nonlocal cfg
        for _, action in ms:
            cfg2, _ = _apply_move(spec, cfg, unit, action)
            moves.append((unit, action))
            cfg = cfg2

    # stage 1: read-only prefixes
    for unit in units:
        w = probe(unit)
        cut = next((i for i, (_, a) in enumerate(w.moves) if isinstance(a, Write)), None)
        if cut is None:
            take(unit, w.moves)
            return _finish(spec, config, moves, units, 0)
        take(unit, w.moves[:cut])
        pending[unit] = w.moves[cut][1]

    iterations = 0
    while True:
        covered = {}
        for u in units:
            covered.setdefault(pending[u].reg, []).append(u)
        shared = sorted(regs for regs, us in covered.items() if len(us) >= 2)
        if not shared:
            raise InconclusiveError(
                "no two units cover a common register; the register budget m "
                "does not bound this algorithm"
            )
        reg_set = frozenset(covered)
        unit = min(covered[shared[0]])
        if iterations >= m:
            raise InconclusiveError(
                f"covered registers kept growing past m={m}; budget assumption broken"
            )
        iterations += 1
        w = probe(unit)
        cut = next(
            (i for i, (_, a) in enumerate(w.moves)
             if isinstance(a, Write) and a.reg not in reg_set),
            None,
        )
        if cut is None:
            take(unit, w.moves)
            return _finish(spec, config, moves, units, iterations)
        take(unit, w.moves[:cut])
        pending[unit] = w.moves[cut][1]
        if pending[unit].reg in reg_set:
            raise EngineError("stage-2 advance stopped inside the covered set")


def _finish(spec, config, moves, units, iterations) -> ReservingConstruction:
    w = _witness(spec, config, moves, units, "reserving")
    return ReservingConstruction(witness=w, stage2_iterations=iterations)


# -- disjoint witnesses and prefix composition -------------------------------

def disjoint_witnesses(spec, config, all_units, p_units, q_units, wp: Witness, wq: Witness,
                       m, depth):
    """Disentangle overlapping witness sets: a fresh spare set takes over the
    side matching its own constructed witness's decision."""
    all_units = sorted(_as_unit(u) for u in all_units)
    p_units = sorted(_as_unit(u) for u in p_units)
    q_units = sorted(_as_unit(u) for u in q_units)
    if wp.decision != 0 or wq.decision != 1:
        raise ValueError("witnesses must return 0 and 1 respectively")
    if len(all_units) < len(p_units) + len(q_units) + m:
        raise ValueError("containing set too small to disentangle the witnesses")
    if not (set(p_units) & set(q_units)):
        return p_units, q_units, wp, wq
    rest = [u for u in all_units
            if u not in p_units and u not in q_units and unit_active(config, u)]
    if len(rest) < m + 1:
        raise ValueError("not enough spare units for a fresh witness set")
    h = rest[: m + 1]
    built = construct_reserving(spec, config, h, m, depth)
    hw = built.witness
    if hw.decision == 0:
        p2, wp2, q2, wq2 = h, hw, q_units, wq
    else:
        p2, wp2, q2, wq2 = p_units, wp, h, hw
    lo, hi = sorted((len(p2), len(q2))), sorted((len(p_units), len(q_units)))
    if not (m + 1 <= lo[0] <= hi[0] and lo[1] <= hi[1]):
        raise EngineError("disjoint replacement broke the size bounds")
    return p2, q2, wp2, wq2


def compose_prefix(spec, config, write_unit, write_action, coverer, inner: Witness, m) -> Witness:
    """Prepend a covered write to a reserving witness of the post-write
    configuration; the coverer keeps the written register reserved."""
    write_unit = _as_unit(write_unit)
    coverer = _as_unit(coverer)
    if not isinstance(write_action, Write):
        raise ValueError("leading step must be a write")
    if write_unit in inner.members or coverer in inner.members or write_unit == coverer:
        raise ValueError("prefix units must be outside the inner witness set")
    if not unit_covers(spec, config, coverer, write_action.reg):
        raise ValueError(f"unit {coverer} does not cover r{write_action.reg}")
    members = sorted(inner.members + (write_unit, coverer))
    moves = ((write_unit, write_action),) + inner.moves
    steps = materialize(spec, config, moves)
    w = Witness(kind="reserving", members=tuple(members), moves=moves,
                steps=steps, decision=inner.decision)
    if not is_reserving(spec, config, members, steps, m):
        raise EngineError("composed execution is not reserving")
    return w
