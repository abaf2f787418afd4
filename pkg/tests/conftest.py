import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rectiplace import data_path  # noqa: E402
from rectiplace.netlist import load_netlist  # noqa: E402


@pytest.fixture(scope="session")
def toy6():
    return load_netlist(data_path("toy6.json"))


@pytest.fixture(scope="session")
def toy10():
    return load_netlist(data_path("toy10.json"))


@pytest.fixture(scope="session")
def tiny3():
    return load_netlist(data_path("tiny3.json"))


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one result line per acceptance criterion."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
