import numpy as np
import pytest

from trackhhl.classical_solver import discretize, solve
from trackhhl.hamiltonian import HamiltonianParams, build_system, enumerate_segments, truth_segments
from trackhhl.toy_model import DetectorConfig, generate_event, minimal_event


def ideal_event(n_particles: int, n_layers: int, seed: int, **kw):
    return generate_event(DetectorConfig(n_layers=n_layers, n_particles=n_particles, seed=seed, **kw))


def pipeline(event, params: HamiltonianParams | None = None):
    """(segments, system, classical active set, truth set) for an event."""
    segs = enumerate_segments(event)
    system = build_system(segs, params or HamiltonianParams())
    active = discretize(solve(system))
    return segs, system, active, truth_segments(segs, event)


@pytest.fixture
def minimal():
    return minimal_event()


@pytest.fixture
def minimal_system(minimal):
    return build_system(enumerate_segments(minimal), HamiltonianParams())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting -----------------------------------------------------------

import time

ACCEPTANCE_LINES: list[str] = []
SUITE_LIMIT_S = 180.0


def record_criterion(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_sessionstart(session):
    session.config._suite_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - config._suite_t0
    lines = list(ACCEPTANCE_LINES)
    lines.append(f"[{'PASS' if elapsed < SUITE_LIMIT_S else 'FAIL'}] criterion 11b suite runtime: "
                 f"{elapsed:.1f} s (limit {SUITE_LIMIT_S:.0f} s)")
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - session.config._suite_t0 >= SUITE_LIMIT_S and exitstatus == 0:
        session.exitstatus = 1
