"""Manufactured smooth solution (no vacuum) and the grid-convergence study.

The exact fields are low-order polynomials in ``r`` with the parity of smooth
radial fields (``rho`` even, ``u`` and ``B`` odd), so every geometric ``1/r``
term is a polynomial and the forcing stays bounded at the center:

    rho = 1 + 0.3 (1 - r^2) (1 + t)
    u   = 0.3 r (1 - r^2) (1 + t)
    B   = 0.4 r (1 - r^2 / 2) (1 + t)

with ``R0 = 1``. The forcing is derived symbolically once per parameter set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp

from radmhd.core import ConfigurationError, FluidParams, RadialGrid, Scenario, weighted_l2

logger = logging.getLogger(__name__)

_r, _t = sp.symbols("r t", nonnegative=True)
RHO_EXPR = 1 + sp.Rational(3, 10) * (1 - _r ** 2) * (1 + _t)
U_EXPR = sp.Rational(3, 10) * _r * (1 - _r ** 2) * (1 + _t)
B_EXPR = sp.Rational(2, 5) * _r * (1 - _r ** 2 / 2) * (1 + _t)


def _vectorize(expr: sp.Expr) -> Callable[[np.ndarray, float], np.ndarray]:
    fn = sp.lambdify((_r, _t), expr, "numpy")
    return lambda r, t: np.broadcast_to(np.asarray(fn(r, t), dtype=float), np.shape(r)).copy()


@lru_cache(maxsize=16)
def _forcing(mu: float, lam: float, a: float, gamma: float):
    nu = 2 * sp.nsimplify(mu) + sp.nsimplify(lam)
    rho, u, B = RHO_EXPR, U_EXPR, B_EXPR
    div = sp.diff(u, _r) + u / _r
    s_rho = sp.diff(rho, _t) + sp.diff(rho * u, _r) + rho * u / _r
    s_u = (rho * (sp.diff(u, _t) + u * sp.diff(u, _r))
           + sp.diff(sp.nsimplify(a) * rho ** sp.nsimplify(gamma), _r)
           - nu * sp.diff(div, _r) + B * (sp.diff(B, _r) + B / _r))
    s_B = sp.diff(B, _t) + sp.diff(u * B, _r)
    return tuple(_vectorize(sp.simplify(e)) for e in (s_rho, s_u, s_B))


def exact_solution(r: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return tuple(_vectorize(e)(r, t) for e in (RHO_EXPR, U_EXPR, B_EXPR))


def manufactured_sources(params: FluidParams):
    """``(r, t) -> (S_rho, S_u, S_B)`` with ``S_u`` a force per unit volume."""
    f_rho, f_u, f_B = _forcing(params.mu, params.lam, params.a_pressure, params.gamma)

    def sources(r: np.ndarray, t: float):
        return f_rho(r, t), f_u(r, t), f_B(r, t)

    return sources


def manufactured_scenario(params: Optional[FluidParams] = None, n: int = 64,
                          t_end: float = 0.05, **kwargs) -> Scenario:
    params = params or FluidParams()
    if params.R0 != 1.0:
        raise ConfigurationError("manufactured-smooth is defined on R0 = 1")
    kwargs.pop("r0", None)
    return Scenario(params=params, n=n,
                    rho0=lambda r: exact_solution(r, 0.0)[0],
                    u0=lambda r: exact_solution(r, 0.0)[1],
                    B0=lambda r: exact_solution(r, 0.0)[2],
                    t_end=t_end, r0=None, preset="manufactured-smooth",
                    sources=manufactured_sources(params), exact=exact_solution, **kwargs)


@dataclass(frozen=True)
class ConvergenceStudy:
    levels: tuple[int, ...]
    errors: tuple[float, ...]
    orders: tuple[float, ...]

    @property
    def min_order(self) -> float:
        return min(self.orders) if self.orders else math.nan

    def rows(self) -> list[tuple[int, float, float]]:
        orders = (math.nan,) + self.orders
        return list(zip(self.levels, self.errors, orders))


def solution_error(state, grid: RadialGrid) -> float:
    """Weighted L2 error of ``(rho, u, B)`` against the exact fields."""
    rho, u, B = exact_solution(grid.nodes, state.t)
    return math.sqrt(weighted_l2(state.rho - rho, grid) ** 2
                     + weighted_l2(state.u - u, grid) ** 2
                     + weighted_l2(state.B - B, grid) ** 2)


def observed_orders(levels: Sequence[int], errors: Sequence[float]) -> tuple[float, ...]:
    return tuple(math.log(errors[i] / errors[i + 1]) / math.log(levels[i + 1] / levels[i])
                 for i in range(len(errors) - 1))


def verify(levels: Sequence[int] = (32, 64, 128, 256), t_end: float = 0.05,
           params: Optional[FluidParams] = None, **kwargs) -> ConvergenceStudy:
    """Run the forced problem at each resolution and measure the error decay."""
    from radmhd.solver import TerminationKind, simulate

    levels = tuple(sorted(int(n) for n in levels))
    if len(levels) < 2:
        raise ConfigurationError("a convergence study needs at least two levels")
    errors = []
    for n in levels:
        result = simulate(manufactured_scenario(params, n=n, t_end=t_end, **kwargs))
        if result.termination.kind is not TerminationKind.REACHED_T_END:
            raise RuntimeError(f"manufactured run at n={n} ended with {result.termination}")
        errors.append(solution_error(result.final_state, RadialGrid(n, 1.0)))
        logger.info("manufactured n=%d error=%.3e", n, errors[-1])
    return ConvergenceStudy(levels, tuple(errors), observed_orders(levels, errors))
