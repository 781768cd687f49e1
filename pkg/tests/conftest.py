import pytest

from powerpost._backend import get_kernels

ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def _available_backends():
    names = ["python"]
    try:
        get_kernels("compiled")
        names.append("compiled")
    except ImportError:
        pass
    return names


@pytest.fixture(params=_available_backends())
def backend(request):
    return get_kernels(request.param)
