import numpy as np
import pytest

from radmhd.core import FluidParams, RadialGrid


@pytest.fixture
def params():
    """2mu + lam = 3, a = 1, gamma = 2, R0 = 1."""
    return FluidParams(mu=1.0, lam=1.0, a_pressure=1.0, gamma=2.0, R0=1.0)


@pytest.fixture
def grid():
    return RadialGrid(128, 1.0)


def compatible_pair(n: int):
    """``B = r`` with ``u = r (r^2 - 1) / 12``: exact vacuum balance for 2mu + lam = 3."""
    g = RadialGrid(n, 1.0)
    r = g.nodes
    return g, r * (r * r - 1.0) / 12.0, r.copy()


def observed_order(hs, errs):
    return np.log(np.asarray(errs[:-1]) / np.asarray(errs[1:])) / np.log(
        np.asarray(hs[:-1]) / np.asarray(hs[1:]))
