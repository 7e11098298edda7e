
import numpy as np
import pytest

from qhist.model import CNOT, H, SystemSchedule, basis_state, computational_observable, embed_gate, identity

ACCEPTANCE = {}


def entangler_schedule() -> SystemSchedule:
    """H on Alice, CNOT, CNOT, H on Alice; both qubits measured each time."""
    hx = embed_gate(H, [0], 2)
    obs = computational_observable(2, [0, 1])
    return SystemSchedule(4, basis_state("00"), (hx, CNOT, CNOT, hx), (obs,) * 4, factors=(2, 2))


def teleport_schedule(alpha=0.6, beta=0.8) -> SystemSchedule:
    """chi (x) beta00; CNOT 0->1 then H on 0; every wire measured at t1..t3."""
    chi = np.array([alpha, beta], dtype=complex)
    bell = (basis_state("00") + basis_state("11")) / np.sqrt(2)
    obs = computational_observable(3, [0, 1, 2])
    steps = (identity(8), embed_gate(CNOT, [0, 1], 3), embed_gate(H, [0], 3))
    return SystemSchedule(8, np.kron(chi, bell), steps, (obs,) * 3, factors=(4, 2))


@pytest.fixture
def entangler():
    return entangler_schedule()


@pytest.fixture
def teleport():
    return teleport_schedule()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for mark in getattr(report, "criterion_marks", ()):
        n, text = mark
        ok, names = ACCEPTANCE.get(n, (True, text))
        ACCEPTANCE[n] = (ok and report.outcome == "passed", names)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criterion_marks = [tuple(m.args) for m in item.iter_markers("criterion")]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {text}")
