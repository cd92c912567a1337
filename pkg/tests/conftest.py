import pytest

_criterion_lines = []


@pytest.fixture(scope="session")
def criterion_report():
    """Record one PASS/FAIL line per acceptance criterion for the summary."""

    def _report(num, passed, detail):
        line = f"CRITERION {num}: {'PASS' if passed else 'FAIL'} - {detail}"
        _criterion_lines.append((num, line))
        print(line)

    return _report


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_criterion_lines):
            terminalreporter.write_line(line)
