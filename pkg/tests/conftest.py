from __future__ import annotations

import functools

import pytest
from hypothesis import HealthCheck, settings

from mfgseg.continuation import trace_branch
from mfgseg.grid1d import Grid
from mfgseg.interactions import InteractionPair, RationalPerturbed, linear_pair

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion label -> (passed, message); printed at the end of the run
ACCEPTANCE: dict = {}


def record(label: str, passed: bool, message: str) -> None:
    ACCEPTANCE[label] = (bool(passed), message)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=_criterion_key):
        passed, message = ACCEPTANCE[label]
        terminalreporter.write_line(f"{label:<6} {'PASS' if passed else 'FAIL'}  {message}")


def _criterion_key(label: str):
    digits = "".join(c for c in label if c.isdigit())
    return int(digits or 0), label


@functools.lru_cache(maxsize=None)
def cached_branch(gammas: tuple, k: int, nu_min: float, M: int, kind: str = "linear"):
    return trace_branch(make_pair(gammas, kind), k, nu_min, M=M)


def make_pair(gammas: tuple, kind: str = "linear") -> InteractionPair:
    if kind == "linear":
        return linear_pair(*gammas)
    return InteractionPair(RationalPerturbed(gammas[0], 0.3, 0.5), RationalPerturbed(gammas[1], 0.2, 0.4))


@pytest.fixture(scope="session")
def sym_branch_256():
    return cached_branch((1.0, 1.0), 1, 1e-3, 256)


@pytest.fixture
def grid64():
    return Grid(64)
