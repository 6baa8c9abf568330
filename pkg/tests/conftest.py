import numpy as np
import pytest

from sc3opt.model import Budget, LinkSpec, LoopSpec
from sc3opt.scenario import reference_summary, four_loops


@pytest.fixture
def loops4():
    return four_loops()


@pytest.fixture
def budget4():
    return Budget(1e6, 2e9)


def random_loop(rng: np.random.Generator, n: int = 100) -> LoopSpec:
    return LoopSpec(
        cycle_time_s=float(rng.uniform(5e-3, 50e-3)),
        extraction_ratio=float(rng.uniform(0.005, 0.5)),
        processing_difficulty=float(rng.uniform(20.0, 2000.0)),
        ul=LinkSpec(float(rng.uniform(1.0, 12.0))),
        dl=LinkSpec(float(rng.uniform(1.0, 12.0))),
        control=reference_summary(n, float(rng.uniform(1.0, 50.0))),
    )


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion, print it, then assert."""

    def _report(name: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
