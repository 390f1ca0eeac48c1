import random

import pytest

from regforce import zoo
from regforce.execution import Execution
from regforce.model import enabled_actions, initial_configuration


@pytest.fixture
def trivial():
    return zoo.get_zoo("trivial-decider")


@pytest.fixture
def flag():
    return zoo.get_zoo("one-register-flag")


@pytest.fixture
def race3():
    return zoo.get_zoo("of-race-3")


def random_execution(spec, inputs, rng: random.Random, steps: int) -> Execution:
    """A random reachable execution: uniform pid and action choices."""
    exec_ = Execution.start(spec, initial_configuration(spec, inputs))
    for _ in range(steps):
        live = [pid for pid in range(len(exec_.final.procs))
                if exec_.final.procs[pid].active]
        if not live:
            break
        pid = rng.choice(live)
        action = rng.choice(enabled_actions(spec, exec_.final, pid))
        exec_ = exec_.extend(pid, action)
    return exec_
