import pytest

_VERDICTS: list[str] = []


class Verdicts:
    """Collects PASS/FAIL lines for one test; ``check()`` fails if any line failed."""

    def __init__(self):
        self.failed = []

    def __call__(self, label: str, ok: bool, detail: str = "") -> bool:
        ok = bool(ok)
        line = f"[{'PASS' if ok else 'FAIL'}] {label}" + (f" :: {detail}" if detail else "")
        _VERDICTS.append(line)
        print(line)
        if not ok:
            self.failed.append(line)
        return ok

    def check(self):
        assert not self.failed, "\n".join(self.failed)


@pytest.fixture
def verdict():
    return Verdicts()


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
