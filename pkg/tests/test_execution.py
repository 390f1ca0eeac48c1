import random

import pytest

from regforce.execution import (
    Execution,
    Step,
    add_process,
    block_write,
    indistinguishable,
    insert_step,
    mirror_history,
)
from regforce.model import (
    EngineError,
    Read,
    Write,
    canonicalize,
    enabled_actions,
    initial_configuration,
)
from conftest import random_execution


def start(spec, inputs):
    return Execution.start(spec, initial_configuration(spec, inputs))


def walk_to_put(exec_, pid):
    """Advance a one-register-flag process to its poised write."""
    action = enabled_actions(exec_.spec, exec_.final, pid)[0]
    assert isinstance(action, Read)
    return exec_.extend(pid, action)


def test_extend_records_read_outcomes(flag):
    exec_ = walk_to_put(start(flag, [0, 1]), 0)
    assert exec_.steps[-1].outcome == "_"
    assert exec_.written_registers() == frozenset()


def test_extend_write_grows_written_set(flag):
    exec_ = walk_to_put(start(flag, [0, 1]), 0)
    before = exec_.written_registers()
    exec_ = exec_.extend(0, enabled_actions(flag, exec_.final, 0)[0])
    assert before == frozenset() and exec_.written_registers() == {0}


def test_written_set_monotone_over_prefixes(race3):
    rng = random.Random(7)
    exec_ = random_execution(race3, [0, 1, 1], rng, 30)
    prev = frozenset()
    for i in range(len(exec_.steps) + 1):
        cur = exec_.written_registers(0, i)
        assert prev <= cur
        prev = cur


def test_replay_validates_outcomes(flag):
    exec_ = walk_to_put(start(flag, [0, 1]), 0)
    tampered = list(exec_.steps)
    tampered[-1] = Step(tampered[-1].pid, tampered[-1].action, "1")
    with pytest.raises(EngineError, match="divergence"):
        Execution.from_steps(flag, exec_.initial, tampered)


def test_block_write_empty_is_identity(flag):
    exec_ = start(flag, [0, 1])
    assert block_write(exec_, []) == exec_


def test_block_write_two_coverers(race3):
    exec_ = start(race3, [0, 1, 1])
    # drive pid0 to cover r0 (poised write 0) and pid1 to cover r0 as well;
    # use distinct registers via separate walks instead
    for _ in range(4):
        exec_ = exec_.extend(0, enabled_actions(race3, exec_.final, 0)[0])
    assert enabled_actions(race3, exec_.final, 0)[0] == Write(0, "0", "sc0c0_0v0")
    exec_w = exec_.extend(0, enabled_actions(race3, exec_.final, 0)[0])
    # pid1 scans the now-written r0, adopts, and covers r1? walk until poised
    cur = exec_w
    while not isinstance(enabled_actions(race3, cur.final, 1)[0], Write):
        cur = cur.extend(1, enabled_actions(race3, cur.final, 1)[0])
    pending = enabled_actions(race3, cur.final, 1)[0]
    done = block_write(cur, [(1, pending.reg)])
    assert done.final.registers[pending.reg] == pending.value


def test_block_write_rejects_duplicate_registers(flag):
    exec_ = start(flag, [0, 1])
    exec_ = walk_to_put(exec_, 0)
    exec_ = walk_to_put(exec_, 1)
    with pytest.raises(ValueError, match="duplicate"):
        block_write(exec_, [(0, 0), (1, 0)])


def test_block_write_rejects_non_coverer(flag):
    exec_ = start(flag, [0, 1])
    with pytest.raises(ValueError, match="cover"):
        block_write(exec_, [(0, 0)])


def walk_until_poised(exec_, pid, reg):
    """Run a process solo until its next action writes the given register."""
    for _ in range(64):
        nxt = enabled_actions(exec_.spec, exec_.final, pid)[0]
        if isinstance(nxt, Write) and nxt.reg == reg:
            return exec_
        exec_ = exec_.extend(pid, nxt)
    raise AssertionError(f"pid {pid} never covered r{reg}")


def test_distinct_register_block_writes_commute(race3):
    # pid1 covers r0 from the untouched scan, pid0 claims r0 and moves on to
    # cover r1; writing the two registers in either order agrees
    exec_ = start(race3, [0, 1])
    exec_ = walk_until_poised(exec_, 1, 0)
    exec_ = walk_until_poised(exec_, 0, 1)
    one = block_write(exec_, [(0, 1), (1, 0)])
    two = block_write(exec_, [(1, 0), (0, 1)])
    assert one.final.registers == two.final.registers
    assert canonicalize(one.final) == canonicalize(two.final)
    assert one.final.registers[0] == "1" and one.final.registers[1] == "0"


def test_add_process_is_invisible(race3):
    exec_ = random_execution(race3, [0, 1], random.Random(11), 20)
    grown, pid = add_process(exec_, 1)
    assert pid == 2
    assert indistinguishable(exec_.final, grown.final, [0, 1])
    grown.validate()


def test_mirror_history_inserts_adjacent_identical_steps(race3):
    exec_ = random_execution(race3, [0, 1], random.Random(5), 16)
    count = len(exec_.steps_of(0))
    grown, clone = add_process(exec_, 0)
    mirrored = mirror_history(grown, 0, count, [clone])
    own, copies = mirrored.steps_of(0), mirrored.steps_of(clone)
    assert [s.action for s in copies] == [s.action for s in own[:count]]
    assert [s.outcome for s in copies] == [s.outcome for s in own[:count]]
    # invisible to everyone else
    assert indistinguishable(exec_.final, mirrored.final, [0, 1])


def test_mirror_history_requires_fresh_mirror(race3):
    exec_ = random_execution(race3, [0, 1], random.Random(5), 10)
    with pytest.raises(EngineError):
        mirror_history(exec_, 0, 1, [1])


def test_insert_step_replays(flag):
    exec_ = start(flag, [0, 0])
    exec_ = walk_to_put(exec_, 0)
    exec_ = walk_to_put(exec_, 1)
    exec_ = exec_.extend(0, enabled_actions(flag, exec_.final, 0)[0])
    # pid1 still covers r0: inserting its identical write before pid0's write
    # leaves the final configuration unchanged except for pid1's state
    spliced = insert_step(exec_, len(exec_.steps) - 1, 1, Write(0, "0", "DONE0"))
    assert spliced.final.registers == exec_.final.registers
    assert indistinguishable(exec_.final, spliced.final, [0])


def test_indistinguishable_basics(flag):
    c1 = initial_configuration(flag, [0, 1])
    assert indistinguishable(c1, c1, [0, 1])
    stepped = Execution.start(flag, c1).extend(1, enabled_actions(flag, c1, 1)[0]).final
    assert indistinguishable(c1, stepped, [0])
    assert not indistinguishable(c1, stepped, [0, 1])
    written = Execution.start(flag, c1)
    written = walk_to_put(written, 0)
    written = written.extend(0, enabled_actions(flag, written.final, 0)[0])
    assert not indistinguishable(c1, written.final, [1])


def test_indistinguishability_transport(race3):
    """Extending two configurations that agree for a pid set with the same
    schedule of that set keeps them indistinguishable and decisions equal."""
    checked = 0
    for seed in range(40):
        rng = random.Random(seed)
        exec_ = random_execution(race3, [0, 1, 1], rng, rng.randrange(0, 18))
        group = [0, 1]
        # a read-only move of the outside process keeps the group's view intact
        other = exec_
        if exec_.final.procs[2].active:
            nxt = enabled_actions(race3, exec_.final, 2)[0]
            if not isinstance(nxt, Read):
                continue
            other = exec_.extend(2, nxt)
        if not indistinguishable(exec_.final, other.final, group):
            continue
        checked += 1
        a, b = exec_, other
        for _ in range(12):
            live = [pid for pid in group if a.final.procs[pid].active]
            if not live:
                break
            pid = rng.choice(live)
            action = enabled_actions(race3, a.final, pid)[0]
            a = a.extend(pid, action)
            b = b.extend(pid, action)
        assert indistinguishable(a.final, b.final, group)
        for pid in group:
            assert a.final.procs[pid].decided == b.final.procs[pid].decided
    assert checked >= 10
