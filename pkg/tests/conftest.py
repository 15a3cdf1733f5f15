import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fairshare.netgen import UserModel, build_joint_chain

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def u_gen():
    return UserModel.two_state(0.6, 0.4, "U_gen")


def u_hi():
    return UserModel.two_state(0.95, 0.05, "U_hi")


def u_lo():
    return UserModel.two_state(0.51, 0.49, "U_lo")


def u_dem():
    return UserModel.two_state(0.4, 0.6, "U_dem")


def from_rows(rows, label=""):
    return UserModel((1, -1), np.array(rows, dtype=float), label)


@pytest.fixture
def hi_lo():
    return build_joint_chain([u_hi(), u_lo()])


@pytest.fixture
def hi_dem():
    return build_joint_chain([u_hi(), u_dem()])


@pytest.fixture
def gen_chain():
    return build_joint_chain([u_gen()])


def random_two_state(rng, lo=0.05, hi=0.95):
    p, q = rng.uniform(lo, hi, size=2)
    return UserModel.two_state(float(p), float(q))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
