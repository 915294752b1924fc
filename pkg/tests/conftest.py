import math

import pytest

from singdamp.damping import BoundedPiece, DampingSpec, PowerPiece, constant_damping, sharp_damping

# acceptance lines collected during the run and echoed in the terminal summary
ACCEPTANCE_LINES = []


def corpus():
    """Five sharpness dampings and one spec mixing two power edges with a bounded bump."""
    specs = {f"sharp({b:g})": sharp_damping(b) for b in (-0.75, -0.5, -0.25, 0.0, 1.0)}
    specs["multi"] = DampingSpec(
        (
            PowerPiece(beta=-0.5, sigma=2 * math.pi / 3, theta=0.0),
            PowerPiece(beta=-0.75, sigma=2 * math.pi / 3, theta=math.pi),
            BoundedPiece(support=(-0.5, 0.5), level=0.7),
        )
    )
    return specs


@pytest.fixture
def sharp():
    return sharp_damping(-0.5)


@pytest.fixture
def unit_damping():
    return constant_damping(1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
