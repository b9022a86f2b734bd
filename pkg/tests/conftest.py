"""Shared fixtures: parsed Young functions and tilted measures built once per session."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from orlicz_lab.tilt import build_tilted  # noqa: E402
from orlicz_lab.young import parse_young  # noqa: E402


@pytest.fixture(scope="session")
def abs_psi():
    return parse_young("pow:1")


@pytest.fixture(scope="session")
def sq_psi():
    return parse_young("pow:2")


@pytest.fixture(scope="session")
def quartic_psi():
    return parse_young("pow:4")


@pytest.fixture(scope="session")
def exp_tilt(abs_psi):
    """mu_1 for |t|: |X| ~ Exp(1), so Psi(X) has mean 1 and variance 1."""
    return build_tilted(abs_psi, 1.0)


@pytest.fixture(scope="session")
def gauss_tilt(sq_psi):
    """mu_1 for t^2: X ~ N(0, 1/2)."""
    return build_tilted(sq_psi, 1.0)


@pytest.fixture(scope="session")
def two_abs():
    """V = 2|x|, the normalized Laplace potential."""
    return parse_young("mix:2:pow:1")
