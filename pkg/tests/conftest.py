import pytest

from hlddc import cli

ACCEPTANCE_LINES = []


def _example_tfs(name):
    cfg = cli.load_example(name)
    return cli._tf(cfg["plant_tf"]), cli._tf(cfg["reference_tf"]), cfg


@pytest.fixture(scope="session")
def dc_motor():
    return _example_tfs("dc_motor")


@pytest.fixture(scope="session")
def flex():
    return _example_tfs("flexible_transmission")


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
