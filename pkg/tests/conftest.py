import numpy as np
import pytest

from cryptosieve import _kernels


@pytest.fixture(params=sorted(_kernels.IMPLEMENTATIONS))
def backend(request, monkeypatch):
    """Run a test once per available kernel implementation."""
    impl = _kernels.IMPLEMENTATIONS[request.param]
    for name, fn in impl.items():
        monkeypatch.setattr(_kernels, name, fn)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Criterion number -> (passed, detail), echoed in the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
