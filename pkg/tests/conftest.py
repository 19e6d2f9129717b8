import functools

import numpy as np
import pytest
from hypothesis import settings

from fracpont.ocp import pontryagin_sweep
from fracpont.ops import SampledPath
from fracpont.problems import build

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

VERDICTS = pytest.StashKey[list]()


@functools.lru_cache(maxsize=None)
def solved(tag: str, n: int, **params):
    """Converged sweep from u0 = 0, shared across test modules."""
    prob = build(tag, **params)
    grid = prob.grid(n)
    it = pontryagin_sweep(prob, SampledPath.constant(grid, np.zeros(prob.m)), grid)
    return prob, it


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def verdict(request):
    """Record one acceptance line; returns the verdict so tests can assert it."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    def record(label: str, passed, detail: str = "", info: bool = False) -> bool:
        tag = "INFO" if info else ("PASS" if passed else "FAIL")
        line = f"{tag} {label}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
