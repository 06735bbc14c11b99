"""Shared fixtures: a fixed elliptic context and seeded RNG per test."""

import numpy as np
import pytest

from loopbrackets import elliptic


@pytest.fixture(scope="session")
def ctx():
    return elliptic.make_context(0.21 + 1.3j)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def random_cell_point(rng, tau):
    """Off-lattice point comfortably inside the origin-centered cell."""
    re = rng.uniform(0.1, 0.42) * rng.choice([-1.0, 1.0])
    im = rng.uniform(0.08, 0.4) * tau.imag * rng.choice([-1.0, 1.0])
    return complex(re, im)
