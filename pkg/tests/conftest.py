import numpy as np
import pytest

from rgbdhuman import synth

_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record a one-line pass/fail verdict for the acceptance summary."""

    def _report(criterion: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append((criterion, bool(ok), detail))
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def kinect():
    return synth.KINECT


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
