import pytest

_GATE = {}


class Gate:
    """Collects one verdict per acceptance criterion."""

    def record(self, number, title, passed, detail=""):
        _GATE[number] = (title, bool(passed), detail)
        return bool(passed)


@pytest.fixture(scope="session")
def gate():
    return Gate()


def pytest_terminal_summary(terminalreporter):
    if not _GATE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_GATE):
        title, passed, detail = _GATE[number]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number:2d}: {title}  ({detail})")
