import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}
_CRITERIA = 10


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, title, ok, detail)."""
    def record(number: int, title: str, ok: bool, detail: str = ""):
        _RESULTS[number] = (title, bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, _CRITERIA + 1):
        if k in _RESULTS:
            title, ok, detail = _RESULTS[k]
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:2d}. {title}: {detail}")
        else:
            terminalreporter.write_line(f"[FAIL] {k:2d}. no verdict recorded (errored, skipped or deselected)")
