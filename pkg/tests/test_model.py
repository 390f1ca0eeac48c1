import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regforce import zoo
from regforce.model import (
    BOTTOM,
    Read,
    Return,
    SpecError,
    Write,
    apply_step,
    canonicalize,
    enabled_actions,
    format_algorithm,
    initial_configuration,
    load_algorithm,
)

TRIVIAL = zoo.TRIVIAL_DECIDER


def test_trivial_decider_loads_with_no_registers():
    spec = load_algorithm(TRIVIAL)
    assert spec.register_count == 0
    assert spec.alphabet == ()
    assert set(spec.states) == {"S0", "S1"}
    assert spec.states["S0"] == (Return(0),)


def test_register_out_of_range_is_a_semantic_error():
    bad = """
algorithm bad
values 0 1
registers 2
input 0 -> A
input 1 -> A
state A: write r3 := 0 -> A
"""
    with pytest.raises(SpecError, match="out of range"):
        load_algorithm(bad)


@pytest.mark.parametrize("name", [e.name for e in zoo.list_zoo()])
def test_zoo_round_trip_parse_print(name):
    spec = load_algorithm(zoo.CATALOG[name].text)
    again = load_algorithm(format_algorithm(spec))
    assert again == spec


@st.composite
def algorithm_texts(draw):
    """Random small valid algorithms: every referenced state and value exists
    and every read is total or carries a default."""
    n_states = draw(st.integers(2, 5))
    k = draw(st.integers(1, 3))
    alphabet = ["0", "1"]
    names = [f"S{i}" for i in range(n_states)]
    lines = ["algorithm fuzzed", "values 0 1", f"registers {k}"]
    lines.append(f"input 0 -> {draw(st.sampled_from(names))}")
    lines.append(f"input 1 -> {draw(st.sampled_from(names))}")
    for name in names:
        for _ in range(draw(st.integers(1, 2))):
            kind = draw(st.sampled_from(["return", "write", "read"]))
            if kind == "return":
                lines.append(f"state {name}: return {draw(st.integers(0, 1))}")
            elif kind == "write":
                reg = draw(st.integers(0, k - 1))
                val = draw(st.sampled_from(alphabet))
                nxt = draw(st.sampled_from(names))
                lines.append(f"state {name}: write r{reg} := {val} -> {nxt}")
            else:
                reg = draw(st.integers(0, k - 1))
                branches = [
                    f"{label} -> {draw(st.sampled_from(names))}"
                    for label in draw(st.sets(st.sampled_from(alphabet + ['_'])))
                ]
                branches.append(f"* -> {draw(st.sampled_from(names))}")
                lines.append(f"state {name}: read r{reg} ? {{ " + " ; ".join(branches) + " }")
    return "\n".join(lines) + "\n"


@settings(max_examples=120, derandomize=True)
@given(algorithm_texts())
def test_generated_algorithms_round_trip(text):
    spec = load_algorithm(text)
    assert load_algorithm(format_algorithm(spec)) == spec


def test_parse_error_carries_line_number():
    with pytest.raises(SpecError, match="line 3"):
        load_algorithm("algorithm x\nregisters 0\nbogus line here\n")


def test_undefined_state_rejected():
    bad = "algorithm x\nvalues 0\nregisters 1\ninput 0 -> A\ninput 1 -> A\n" \
          "state A: write r0 := 0 -> NOPE\n"
    with pytest.raises(SpecError, match="NOPE"):
        load_algorithm(bad)


def test_write_of_bottom_rejected():
    bad = "algorithm x\nvalues 0\nregisters 1\ninput 0 -> A\ninput 1 -> A\n" \
          "state A: write r0 := _ -> A\n"
    with pytest.raises(SpecError):
        load_algorithm(bad)


def test_read_without_default_must_cover_all_outcomes():
    bad = "algorithm x\nvalues 0 1\nregisters 1\ninput 0 -> A\ninput 1 -> A\n" \
          "state A: read r0 ? { 0 -> A ; _ -> A }\n"
    with pytest.raises(SpecError, match="default"):
        load_algorithm(bad)
    ok = "algorithm x\nvalues 0 1\nregisters 1\ninput 0 -> A\ninput 1 -> A\n" \
         "state A: read r0 ? { 0 -> A ; 1 -> A ; _ -> A }\n"
    assert load_algorithm(ok).states["A"][0].default is None


def test_missing_input_rejected():
    with pytest.raises(SpecError, match="input 1"):
        load_algorithm("algorithm x\nregisters 0\ninput 0 -> A\nstate A: return 0\n")


def test_nondeterministic_choice_is_an_action_set():
    text = """
algorithm coin
values 0 1
registers 1
input 0 -> F
input 1 -> F
state F: write r0 := 0 -> D0
state F: write r0 := 1 -> D1
state D0: return 0
state D1: return 1
"""
    spec = load_algorithm(text)
    config = initial_configuration(spec, [0])
    assert len(enabled_actions(spec, config, 0)) == 2


def test_initial_configuration_trivial():
    spec = load_algorithm(TRIVIAL)
    config = initial_configuration(spec, [0, 1])
    assert [p.state for p in config.procs] == ["S0", "S1"]
    assert all(p.active for p in config.procs)
    assert config.registers == ()


def test_initial_configuration_same_inputs_share_class():
    spec = zoo.get_zoo("of-race-3")
    config = initial_configuration(spec, [0] * 4)
    regs, classes = canonicalize(config)
    assert regs == (BOTTOM,) * 3
    assert len(set(classes)) == 1


def test_initial_configuration_of_race_three_processes():
    spec = zoo.get_zoo("of-race-3")
    config = initial_configuration(spec, [0, 1, 1])
    assert len(config.procs) == 3
    assert all(p.active for p in config.procs)
    assert set(config.registers) == {BOTTOM}


def test_enabled_actions_empty_iff_returned():
    spec = load_algorithm(TRIVIAL)
    config = initial_configuration(spec, [0])
    assert enabled_actions(spec, config, 0) == (Return(0),)
    done = apply_step(spec, config, 0, Return(0))
    assert enabled_actions(spec, done, 0) == ()
    with pytest.raises(ValueError):
        enabled_actions(spec, config, 5)


def test_apply_step_read_of_bottom_follows_bottom_branch():
    spec = zoo.get_zoo("one-register-flag")
    config = initial_configuration(spec, [0])
    read = enabled_actions(spec, config, 0)[0]
    assert isinstance(read, Read)
    after = apply_step(spec, config, 0, read)
    assert after.procs[0].state == "PUT0"
    assert after.registers == config.registers


def test_apply_step_write_updates_register():
    spec = zoo.get_zoo("one-register-flag")
    config = initial_configuration(spec, [1])
    config = apply_step(spec, config, 0, enabled_actions(spec, config, 0)[0])
    write = enabled_actions(spec, config, 0)[0]
    assert isinstance(write, Write)
    after = apply_step(spec, config, 0, write)
    assert after.registers == ("1",)


def test_same_state_processes_move_identically():
    spec = zoo.get_zoo("of-race-3")
    config = initial_configuration(spec, [0, 0])
    action = enabled_actions(spec, config, 0)[0]
    a = apply_step(spec, config, 0, action)
    b = apply_step(spec, config, 1, action)
    assert a.procs[0].state == b.procs[1].state


def test_apply_step_rejects_non_enabled_action():
    spec = load_algorithm(TRIVIAL)
    config = initial_configuration(spec, [0])
    with pytest.raises(ValueError):
        apply_step(spec, config, 0, Return(1))


def test_canonicalize_is_pid_permutation_invariant():
    spec = zoo.get_zoo("of-race-3")
    c1 = initial_configuration(spec, [0, 1])
    c2 = initial_configuration(spec, [1, 0])
    assert canonicalize(c1) == canonicalize(c2)


def test_canonicalize_sees_registers_and_decisions():
    spec = zoo.get_zoo("one-register-flag")
    base = initial_configuration(spec, [0, 1])
    stepped = apply_step(spec, base, 0, enabled_actions(spec, base, 0)[0])
    assert canonicalize(base) != canonicalize(stepped)

    trivial = load_algorithm(TRIVIAL)
    c = initial_configuration(trivial, [0])
    returned = apply_step(trivial, c, 0, Return(0))
    assert canonicalize(c) != canonicalize(returned)


def test_replay_determinism_same_steps_same_result():
    spec = zoo.get_zoo("of-race-3")
    c1 = initial_configuration(spec, [0, 1])
    c2 = initial_configuration(spec, [0, 1])
    for pid in (0, 1, 0, 0, 1):
        a1 = enabled_actions(spec, c1, pid)[0]
        a2 = enabled_actions(spec, c2, pid)[0]
        assert a1 == a2
        c1 = apply_step(spec, c1, pid, a1)
        c2 = apply_step(spec, c2, pid, a2)
    assert c1 == c2
