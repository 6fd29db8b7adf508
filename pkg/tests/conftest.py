import pytest

# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)
