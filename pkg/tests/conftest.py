import pytest

from ballsbins import _backend

_ACCEPTANCE = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    prev = _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(prev)


@pytest.fixture
def numpy_backend():
    prev = _backend.set_backend("numpy")
    yield
    _backend.set_backend(prev)


@pytest.fixture
def report():
    """Record one acceptance line: report(criterion, passed, detail)."""

    def add(criterion, passed, detail):
        _ACCEPTANCE.append((criterion, bool(passed), detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: (r[0], not r[1])):
        terminalreporter.write_line(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
