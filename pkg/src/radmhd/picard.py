"""Linearized successive approximations on a short time slab.

Iterate ``0`` is the heat flow of ``u0`` with ``rho`` and ``B`` frozen at the
(regularized) initial data. Iterate ``i >= 1`` freezes ``v = u^(i-1)`` and
solves three linear problems in turn:

* ``rho_t + (rho v)_r + rho v / r = 0``          (upwind, explicit)
* ``B_t + (v B)_r = 0``                          (upwind, explicit)
* ``rho u_t + rho v u_r + p(rho)_r = (2mu+lam) (u_r + u/r)_r - B (B_r + B/r)``
  (implicit Euler, implicit upwind advection)

Contraction is measured by ``psi^(i) = sup_t ||rho~||^2 + ||B~||^2 +
||sqrt(rho) u~||^2`` where ``~`` is the difference to iterate ``i - 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from radmhd.core import (
    ConfigurationError,
    FluidParams,
    RadialGrid,
    Scenario,
    build_compatible_u0,
    sample,
    weighted_l2,
)
from radmhd.solver import (
    SingularSolveError,
    ddr,
    lorentz_force,
    solve_implicit_viscous,
    transport_density,
    transport_field,
    viscous_bands,
)

logger = logging.getLogger(__name__)

PSI_STOP = 1e-14
DIVERGENCE_RUN = 3


def _slab_steps(T: float, dt: float) -> int:
    if not (T > 0 and dt > 0):
        raise ConfigurationError(f"T and dt must be > 0, got T={T}, dt={dt}")
    return max(1, int(round(T / dt)))


def heat_init(u0: np.ndarray, grid: RadialGrid, T: float, dt: float) -> np.ndarray:
    """Implicit-Euler flow of ``w_t = (w_r + w/r)_r`` with ``w = 0`` at both ends."""
    m = _slab_steps(T, dt)
    w = np.zeros((m + 1, grid.n + 1))
    w[0] = u0
    w[0, 0] = w[0, -1] = 0.0
    ones = np.ones(grid.n + 1)
    for k in range(m):
        w[k + 1] = solve_implicit_viscous(ones, w[k], 1.0, dt, grid)
    return w


def transport_solve(v: np.ndarray, rho0: np.ndarray, grid: RadialGrid, dt: float) -> np.ndarray:
    """Density on the slab, advected by ``v[k]`` over ``[t_k, t_k+1]``."""
    rho = np.empty_like(v)
    rho[0] = rho0
    for k in range(len(v) - 1):
        rho[k + 1] = transport_density(rho[k], v[k], dt, grid)
    return rho


def induction_solve(v: np.ndarray, B0: np.ndarray, grid: RadialGrid, dt: float) -> np.ndarray:
    B = np.empty_like(v)
    B[0] = B0
    B[0, 0] = 0.0
    for k in range(len(v) - 1):
        B[k + 1] = transport_field(B[k], v[k], dt, grid)
    return B


def momentum_solve(rho: np.ndarray, B: np.ndarray, v: np.ndarray, u0: np.ndarray,
                   params: FluidParams, grid: RadialGrid, dt: float) -> np.ndarray:
    """Linear momentum equation on the slab, one tridiagonal solve per step."""
    if np.any(rho[1:, 1:-1] <= 0):
        raise SingularSolveError("momentum_solve needs rho > 0 on the slab (regularize with delta)")
    lower, diag, upper = viscous_bands(grid)
    h = grid.h
    u = np.empty_like(v)
    u[0] = u0
    u[0, 0] = u[0, -1] = 0.0
    for k in range(len(v) - 1):
        m = rho[k + 1, 1:-1]
        vel = v[k + 1, 1:-1]
        adv = m * np.abs(vel) / h
        back = vel > 0
        ab = np.zeros((3, grid.n - 1))
        ab[1] = m + dt * adv - dt * params.nu * diag
        up = -dt * params.nu * upper + np.where(back, 0.0, -dt * adv)
        lo = -dt * params.nu * lower + np.where(back, -dt * adv, 0.0)
        ab[0, 1:] = up[:-1]
        ab[2, :-1] = lo[1:]
        force = -ddr(params.pressure(rho[k + 1]), grid) + lorentz_force(B[k + 1], grid)
        rhs = m * u[k, 1:-1] + dt * force[1:-1]
        try:
            u[k + 1, 1:-1] = solve_banded((1, 1), ab, rhs, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise SingularSolveError(f"momentum system singular at step {k}: {exc}") from exc
        u[k + 1, 0] = u[k + 1, -1] = 0.0
        if not np.all(np.isfinite(u[k + 1])):
            raise SingularSolveError(f"momentum solve produced non-finite values at step {k}")
    return u


@dataclass(frozen=True)
class PicardIterate:
    index: int
    rho: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    psi: Optional[float] = None
    grad_diff: Optional[float] = None
    ratio: Optional[float] = None


@dataclass
class PicardResult:
    iterates: list
    T: float
    dt: float
    delta: float
    converged: bool = False
    diverged: bool = False

    def __iter__(self) -> Iterator[PicardIterate]:
        return iter(self.iterates)

    def __len__(self) -> int:
        return len(self.iterates)

    def __getitem__(self, i: int) -> PicardIterate:
        return self.iterates[i]

    @property
    def psi(self) -> np.ndarray:
        return np.array([it.psi for it in self.iterates if it.psi is not None])

    @property
    def ratios(self) -> np.ndarray:
        return np.array([it.ratio for it in self.iterates if it.ratio is not None])

    @property
    def psi_partial_sums(self) -> np.ndarray:
        return np.cumsum(self.psi)

    @property
    def grad_partial_sums(self) -> np.ndarray:
        return np.cumsum([it.grad_diff for it in self.iterates if it.grad_diff is not None])


def _compare(new: PicardIterate, old: PicardIterate, grid: RadialGrid, dt: float
             ) -> tuple[float, float]:
    psi = 0.0
    grad_sq = np.empty(len(new.u))
    for k in range(len(new.u)):
        du = new.u[k] - old.u[k]
        value = (weighted_l2(new.rho[k] - old.rho[k], grid) ** 2
                 + weighted_l2(new.B[k] - old.B[k], grid) ** 2
                 + weighted_l2(np.sqrt(new.rho[k]) * du, grid) ** 2)
        psi = max(psi, value)
        grad_sq[k] = weighted_l2(ddr(du, grid), grid) ** 2
    grad = float(np.sum(0.5 * dt * (grad_sq[1:] + grad_sq[:-1])))
    return psi, grad


def initial_data(scenario: Scenario, delta: float,
                 grid: RadialGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``rho0 + delta``, ``u0`` (compatible with the regularized density if asked) and ``B0``."""
    rho0 = sample(scenario.rho0, grid, "rho0") + delta
    B0 = sample(scenario.B0, grid, "B0")
    B0[0] = 0.0
    if isinstance(scenario.u0, str):
        u0 = build_compatible_u0(scenario.params, rho0, B0, grid)
    else:
        u0 = sample(scenario.u0, grid, "u0")
    u0[0] = u0[-1] = 0.0
    return rho0, u0, B0


def iterate(scenario: Scenario, delta: float = 1e-3, n_iters: int = 20, T: float = 0.05,
            dt: Optional[float] = None) -> PicardResult:
    """Run the successive approximations on ``[0, T]``.

    Stops after ``n_iters`` iterates, when ``psi < 1e-14``, or when ``psi`` has
    grown for three consecutive iterates (flagged as divergence, not raised).
    """
    if not delta > 0:
        raise ConfigurationError(f"delta must be > 0, got {delta}")
    if n_iters < 1:
        raise ConfigurationError("n_iters must be >= 1")
    grid = scenario.grid
    dt = dt if dt is not None else T / 100.0
    params = scenario.params
    rho0, u0, B0 = initial_data(scenario, delta, grid)

    m = _slab_steps(T, dt)
    frozen = np.ones((m + 1, 1))
    prev = PicardIterate(0, rho0 * frozen, heat_init(u0, grid, T, dt), B0 * frozen)
    result = PicardResult([prev], T=m * dt, dt=dt, delta=delta)
    growth = 0
    for i in range(1, n_iters + 1):
        v = prev.u
        rho = transport_solve(v, rho0, grid, dt)
        B = induction_solve(v, B0, grid, dt)
        u = momentum_solve(rho, B, v, u0, params, grid, dt)
        cur = PicardIterate(i, rho, u, B)
        psi, grad = _compare(cur, prev, grid, dt)
        ratio = psi / prev.psi if prev.psi else None
        cur = PicardIterate(i, rho, u, B, psi, grad, ratio)
        result.iterates.append(cur)
        logger.debug("picard i=%d psi=%.3e grad=%.3e", i, psi, grad)
        if prev.psi is not None and psi > prev.psi:
            growth += 1
        else:
            growth = 0
        prev = cur
        if psi < PSI_STOP:
            result.converged = True
            break
        if growth >= DIVERGENCE_RUN:
            result.diverged = True
            logger.warning("picard psi grew for %d consecutive iterates", growth)
            break
    return result


def bump_scenario(n: int = 128, params: Optional[FluidParams] = None) -> Scenario:
    """Smooth positive-density data: ``rho0 = 1 + r^2``, a velocity bump, ``B0 = r (1 - r)``."""
    params = params or FluidParams()
    R0 = params.R0
    return Scenario(params=params, n=n,
                    rho0=lambda r: 1.0 + (r / R0) ** 2,
                    u0=lambda r: 0.5 * np.sin(np.pi * r / R0) ** 2,
                    B0=lambda r: (r / R0) * (1.0 - r / R0),
                    t_end=1.0, preset="picard-bump")


def t_sweep(scenario: Scenario, horizons: Sequence[float], delta: float = 1e-3,
            n_iters: int = 20, steps: int = 100) -> list[PicardResult]:
    """Independent runs at several slab lengths with the same number of time steps."""
    return [iterate(scenario, delta, n_iters, T, T / steps) for T in horizons]


def plateau_index(partial_sums: np.ndarray, rtol: float = 1e-6) -> Optional[int]:
    """First iterate after which the partial sums change by less than ``rtol``."""
    if len(partial_sums) == 0:
        return None
    final = partial_sums[-1]
    if final == 0:
        return 0
    changes = np.abs(final - partial_sums) / abs(final)
    idx = np.nonzero(changes <= rtol)[0]
    return int(idx[0]) if len(idx) else None


__all__ = [
    "PicardIterate", "PicardResult", "heat_init", "transport_solve", "induction_solve",
    "momentum_solve", "iterate", "bump_scenario", "t_sweep", "plateau_index", "initial_data",
]
