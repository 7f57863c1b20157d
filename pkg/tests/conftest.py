import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rayleigh_damping.profile import ProfileSpec, build_profile  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def exp_profile():
    return build_profile(ProfileSpec("builtin-exp", {}))


@pytest.fixture(scope="session")
def jet_profile():
    return build_profile(ProfileSpec("builtin-jet", {}))


@pytest.fixture(scope="session")
def linear_profile():
    return build_profile(ProfileSpec("builtin-linear-window", {}))


@pytest.fixture(scope="session")
def parabola_profile():
    return build_profile(ProfileSpec("builtin-parabola-window", {}))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
