import math

import numpy as np
import pytest

from radmhd.bound import (
    ALPHA_HI,
    ALPHA_LO,
    DegenerateBoundError,
    bound_shape,
    bound_table,
    criterion_scaling,
    generic_criterion,
    golden_section_max,
    k_alpha,
    lifespan_bound,
    multiplier_identity_check,
    optimal_alpha,
    optimize_alpha,
    power_multiplier,
)
from radmhd.core import FluidParams, RadialGrid

from conftest import compatible_pair, observed_order


def grid_scan_argmax(fn, lo, hi, points=100_001, rounds=4):
    """Dense scan, re-centred and repeated on a bracket of +-10 spacings."""
    for _ in range(rounds):
        xs = np.linspace(lo, hi, points)
        vals = np.array([fn(x) for x in xs])
        k = int(np.argmax(vals))
        step = xs[1] - xs[0]
        lo, hi = max(lo, xs[k] - 10 * step), min(hi, xs[k] + 10 * step)
    return xs[k]


@pytest.mark.parametrize("alpha,expected", [(1.5, 2.9433757), (1.2, 3.3174602), (1.8, 2.8987545)])
def test_k_alpha(alpha, expected):
    assert k_alpha(alpha) == pytest.approx(expected, abs=1e-6)


def test_k_alpha_closed_form():
    assert k_alpha(1.5) == 1.5 + 2.5 / math.sqrt(3.0)
    assert k_alpha(1.2) == pytest.approx(1.2 / math.sqrt(0.4) + 2.2 / math.sqrt(2.4), rel=1e-15)


@pytest.mark.parametrize("alpha", [1.0, 2.0, 0.5, 2.5])
def test_k_alpha_domain(alpha):
    with pytest.raises(DegenerateBoundError):
        k_alpha(alpha)


def test_k_alpha_shape():
    alphas = np.linspace(1.001, 1.999, 20001)
    K = np.array([k_alpha(a) for a in alphas])
    assert np.all(K >= 2.0)
    assert 2.88 <= K.min() <= 2.90
    k = int(np.argmin(K))
    assert 0 < k < len(K) - 1
    assert np.all(np.diff(K[: k + 1]) < 0) and np.all(np.diff(K[k:]) > 0)


def test_lifespan_example():
    params = FluidParams(mu=1.0, lam=1.0, R0=1.0)
    res = lifespan_bound(params, 1.0, 1.0, 1.5)
    assert res.divu_lower == pytest.approx(0.0141561, abs=1e-6)
    assert res.T_max == pytest.approx(4990.1, abs=0.5)
    assert res.T_max_disc == pytest.approx(res.T_max / (2 * math.pi))


def test_lifespan_homogeneity():
    p = FluidParams(mu=1.0, lam=1.0, R0=1.0)
    base = lifespan_bound(p, 1.0, 1.0, 1.5)
    double_c = lifespan_bound(p, 2.0, 1.0, 1.5)
    assert double_c.divu_lower == pytest.approx(4 * base.divu_lower)
    assert double_c.T_max == pytest.approx(base.T_max / 16)
    wide = lifespan_bound(FluidParams(mu=1.0, lam=1.0, R0=2.0), 1.0, 1.0, 1.5)
    assert wide.divu_lower == pytest.approx(base.divu_lower / 2)
    assert wide.T_max == pytest.approx(4 * base.T_max)


def test_lifespan_monotone():
    p = FluidParams(mu=1.0, lam=1.0, R0=1.0)
    T = lambda **kw: lifespan_bound(kw.get("p", p), kw.get("C0", 1.0), kw.get("E0", 1.0), 1.5).T_max
    assert T(C0=2.0) < T()
    assert T(E0=2.0) > T()
    assert T(p=FluidParams(mu=1.0, lam=1.0, R0=2.0)) > T()
    assert T(p=FluidParams(mu=2.0, lam=1.0, R0=1.0)) > T()


def test_lifespan_degenerate():
    p = FluidParams()
    with pytest.raises(DegenerateBoundError):
        lifespan_bound(p, 0.0, 1.0, 1.5)
    with pytest.raises(DegenerateBoundError):
        lifespan_bound(p, 1.0, 0.0, 1.5)
    with pytest.raises(DegenerateBoundError):
        optimize_alpha(p, 0.0, 1.0)


def test_objective_vanishes_at_endpoints():
    assert bound_shape(ALPHA_LO) < 1e-2 * bound_shape(1.1)
    assert bound_shape(1.0 + 1e-12) < bound_shape(ALPHA_LO)
    assert bound_shape(ALPHA_HI) < 1e-9


def test_optimize_matches_grid_oracle():
    oracle = grid_scan_argmax(bound_shape, ALPHA_LO, ALPHA_HI)
    assert abs(optimal_alpha() - oracle) < 1e-8


def test_optimize_invariance():
    base = optimize_alpha(FluidParams(mu=1.0, lam=1.0), 1.0, 1.0)
    for kw, C0, E0 in [({}, 7.0, 1.0), ({}, 1.0, 3.0), ({"R0": 5.0}, 1.0, 1.0),
                       ({"mu": 4.0}, 0.1, 1.0)]:
        other = optimize_alpha(FluidParams(**{"mu": 1.0, "lam": 1.0, **kw}), C0, E0)
        assert other.alpha == base.alpha
    table = bound_table(FluidParams(), 1.0, 1.0)
    assert all(row.divu_lower <= base.divu_lower for row in table)


def test_golden_section_quadratic():
    assert golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0) == pytest.approx(0.3, abs=1e-9)


class TestMultiplierIdentity:
    def test_compatible_pair_converges(self, params):
        levels = [64, 128, 256, 512]
        defects = []
        for n in levels:
            g, u, B = compatible_pair(n)
            defects.append(multiplier_identity_check(B, u, 1.0, 1.5, params, g).defect)
        assert defects[-1] < 1e-6
        assert np.all(observed_order([1 / n for n in levels], defects) >= 1.5)

    def test_zero(self, params, grid):
        z = np.zeros(grid.n + 1)
        chk = multiplier_identity_check(z, z, 1.0, 1.5, params, grid)
        assert chk.lhs == chk.rhs == chk.defect == 0.0

    def test_negative_control(self, params):
        defects = []
        for n in (64, 256):
            g = RadialGrid(n, 1.0)
            r = g.nodes
            defects.append(multiplier_identity_check(np.sin(3 * r) * r, r * (1 - r) * np.cos(2 * r),
                                                     1.0, 1.5, params, g).defect)
        assert min(defects) > 0.1
        assert defects[1] == pytest.approx(defects[0], rel=1e-2)


class TestGenericCriterion:
    def test_power_multiplier_finite(self):
        f, fp = power_multiplier(1.5, 1.0)
        res = generic_criterion(f, 1.0, RadialGrid(400, 1.0), fprime=fp)
        assert res.applicable and 0 < res.value < math.inf

    def test_scaling_exponent(self):
        values, slope = criterion_scaling(1.5, [1.0, 2.0, 4.0])
        assert all(v > 0 for v in values)
        # sqrt(R^(2 alpha) / R^... ) * R^(1 - alpha): the product scales like R^1
        assert slope == pytest.approx(1.0, abs=1e-2)

    def test_numeric_derivative_agrees(self):
        f, fp = power_multiplier(1.5, 1.0)
        g = RadialGrid(400, 1.0)
        a = generic_criterion(f, 1.0, g, fprime=fp).value
        b = generic_criterion(f, 1.0, g).value
        assert b == pytest.approx(a, rel=1e-3)

    def test_alpha_zero_inapplicable(self):
        res = generic_criterion(lambda r: 1.0 - r, 1.0, RadialGrid(200, 1.0), fprime=lambda r: -1 + 0 * r)
        assert not res.applicable
        assert "diverges" in res.reason

    def test_zero_inapplicable(self):
        res = generic_criterion(lambda r: 0 * r, 1.0, RadialGrid(200, 1.0))
        assert not res.applicable and "positive" in res.reason
