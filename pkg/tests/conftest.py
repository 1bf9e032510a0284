import pytest

from pidtune.config import SHIPPED, load_config

# (criterion, PASS/FAIL, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def configs():
    return {name: load_config(name) for name in SHIPPED}


@pytest.fixture(scope="session", params=SHIPPED)
def system(request, configs):
    return configs[request.param]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
