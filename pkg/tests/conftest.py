import pytest

_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""

    def record(number, title, ok, detail=""):
        _VERDICTS[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}  {title}  ({detail})"
        print(_VERDICTS[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[k])
