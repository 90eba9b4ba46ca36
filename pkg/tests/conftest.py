import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict("A1", ok, "detail")``; the line is printed at the end."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(name: str, ok: bool, detail: str) -> bool:
        lines.append(f"{name} {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
