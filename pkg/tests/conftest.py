import pytest


def pytest_configure(config):
    config._criterion_lines = []


@pytest.fixture(scope="session")
def criterion_log(request):
    lines = request.config._criterion_lines

    def log(number, passed, text):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {text}"
        lines.append((number, line))
        print(line)
        return passed

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
