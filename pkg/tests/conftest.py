import time

import pytest

_REPORT = []


class _Criterion:
    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.detail = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        within = elapsed < self.limit_s
        ok = exc_type is None and within
        status = "PASS" if ok else "FAIL"
        timing = f"{elapsed:.1f}s / {self.limit_s:.0f}s"
        if not within:
            timing += " over limit"
        line = f"[{status}] criterion {self.number} ({self.title}): {self.detail} [{timing}]"
        _REPORT.append(line)
        print(line)
        if exc_type is None and not within:
            pytest.fail(f"criterion {self.number} exceeded its runtime limit ({timing})")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
