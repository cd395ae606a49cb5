import pytest


class CountingSource:
    """Iterable over ``range(n)`` (or ``n`` itself) that counts how often it is pulled."""

    def __init__(self, n):
        self.data = range(n) if isinstance(n, int) else n
        self.pulls = 0

    def __iter__(self):
        for x in self.data:
            self.pulls += 1
            yield x


@pytest.fixture
def counting():
    return CountingSource


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
