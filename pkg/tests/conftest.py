import pytest

from dgrx import Registry, synth_registry

from acceptance_log import ACCEPTANCE_RESULTS


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  ({detail})")


@pytest.fixture(scope="session")
def default_registry():
    return Registry.default()


@pytest.fixture(scope="session")
def small_registry():
    return synth_registry()
