import pytest

from gfdetect import _backend, detector, montecarlo, probstat

ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] C{number} {title}"
    if detail:
        line += f" :: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(params=_backend.available())
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    mod = _backend.load(request.param)
    for target in (detector, montecarlo, probstat):
        monkeypatch.setattr(target, "kernels", mod)
    return mod


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
