import pytest

ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, title, passed, detail)."""

    def record(number, title, passed, detail=""):
        ACCEPTANCE.append((number, title, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(
            f"{'PASS' if passed else 'FAIL'}  {number:>2}. {title} {detail}".rstrip())
