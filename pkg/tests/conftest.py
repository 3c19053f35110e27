import json
from pathlib import Path

import numpy as np
import pytest

from chiralrp.pipeline import RunConfig
from chiralrp.systemfile import load_system

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def toy1():
    return load_system("toy-1n1n")


@pytest.fixture(scope="session")
def toy2():
    return load_system("toy-2n2n")


@pytest.fixture(scope="session")
def toy3():
    return load_system("toy-3n3n")


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture
def base1(toy1):
    return RunConfig(toy1)


def random_density(rng, dim, rank=None, trace=1.0):
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return trace * rho / np.trace(rho).real


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(criterion: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
