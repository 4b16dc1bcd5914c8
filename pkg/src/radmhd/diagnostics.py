"""Per-step diagnostics: vacuum charge, energy, and the multiplier inequality chain.

Conventions. The vacuum charge ``Q = int_0^R B dr`` uses the plain line
measure ``dr``; norms use the ``r dr`` weight without 2*pi; the energy uses the
full physical measure ``2*pi*r dr``. The vacuum ball ``[0, R(t)]`` is defined
by the particle-path tracker, not by the discrete support of ``rho``; the
momentum-balance residual additionally requires the node density to sit at or
below the velocity-mass floor, where the implicit solve reduces to the
quasi-static balance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from radmhd.bound import divergence_lower_bound, k_alpha
from radmhd.core import FluidParams, RadialGrid, RadialState, VacuumTracker, trapezoid, weighted_l2
from radmhd.quadrature import integrate_to, power_weighted, truncate
from radmhd.solver import apply_viscous, ddr, div_u

CHAIN_TOL = 1e-6


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    Q: float
    E: float
    divu_l2: float
    keyc0_lhs: float
    keyc0_rhs: float
    keyc1_lhs: float
    keyc1_rhs: float
    divu_lower: float
    vac_residual: float
    R: float
    max_grad_u: float
    dt: float

    @classmethod
    def columns(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> tuple[float, ...]:
        return tuple(asdict(self).values())

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.values())


@dataclass(frozen=True)
class ChainValues:
    keyc0_lhs: float
    keyc0_rhs: float
    keyc1_lhs: float
    keyc1_rhs: float
    divu_lower: float
    quad_error: float = 0.0

    def slack(self, lhs: float, rhs: float) -> float:
        return max(CHAIN_TOL * abs(rhs), 5.0 * self.quad_error)

    @property
    def keyc0_holds(self) -> bool:
        return self.keyc0_lhs <= self.keyc0_rhs + self.slack(self.keyc0_lhs, self.keyc0_rhs)

    @property
    def keyc1_holds(self) -> bool:
        return self.keyc1_lhs <= self.keyc1_rhs + self.slack(self.keyc1_lhs, self.keyc1_rhs)


def magnetic_charge(state_or_B, R: float, grid: RadialGrid) -> float:
    """``int_0^R B dr``, the partial cell at ``R`` linearly interpolated."""
    B = getattr(state_or_B, "B", state_or_B)
    return integrate_to(B, R, grid)


def advance_vacuum_radius(tracker: VacuumTracker, state_or_u, dt: float,
                          grid: RadialGrid) -> VacuumTracker:
    """Midpoint step of ``R' = u(R)`` with ``u`` frozen and linearly interpolated."""
    if not tracker.active:
        return tracker
    u = getattr(state_or_u, "u", state_or_u)
    r = grid.nodes
    k1 = np.interp(tracker.R, r, u)
    k2 = np.interp(tracker.R + 0.5 * dt * k1, r, u)
    R = float(tracker.R + dt * k2)
    active = 0.0 < R <= grid.R0
    return VacuumTracker(R=R if active else min(max(R, 0.0), grid.R0), active=active)


def energy(state: RadialState, params: FluidParams, grid: RadialGrid) -> float:
    """``2 pi int (rho u^2/2 + B^2/2 + a rho^gamma / (gamma-1)) r dr``."""
    density = (0.5 * state.rho * state.u ** 2 + 0.5 * state.B ** 2
               + params.pressure(state.rho) / (params.gamma - 1.0))
    return 2.0 * math.pi * trapezoid(density * grid.nodes, grid)


def _chain_integrals(B: np.ndarray, R: float, alpha: float, grid: RadialGrid) -> tuple[float, float]:
    nodes, Bv = truncate(B, R, grid)
    Q = float(np.sum(0.5 * np.diff(nodes) * (Bv[1:] + Bv[:-1]))) if len(nodes) > 1 else 0.0
    moment = power_weighted(nodes, Bv * Bv, alpha - 1.0)
    return Q, moment


def inequality_chain(state_or_B, tracker: VacuumTracker, params: FluidParams, alpha: float,
                     grid: RadialGrid, divu_norm: Optional[float] = None) -> ChainValues:
    """Both sides of the two inequalities and the resulting divergence bound.

    With ``M = int_0^R B^2 r^(alpha-1) dr``:

    * ``(2-alpha)/2 * R * M <= (2mu+lam) K(alpha) R^alpha ||div u||``
    * ``Q^2 <= M R^(2-alpha) / (2-alpha)``

    ``divu_lower`` uses the current charge. ``quad_error`` estimates the
    quadrature error of ``Q`` and ``M`` by comparison with every other node.
    """
    if not 1.0 < alpha < 2.0:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    if not tracker.active:
        raise ValueError("inequality chain needs an active vacuum tracker")
    B = getattr(state_or_B, "B", state_or_B)
    R = tracker.R
    if divu_norm is None:
        divu_norm = weighted_l2(div_u(state_or_B, grid), grid)
    Q, M = _chain_integrals(B, R, alpha, grid)
    K = k_alpha(alpha)
    lhs0 = 0.5 * (2.0 - alpha) * R * M
    rhs0 = params.nu * K * R ** alpha * divu_norm
    lhs1 = Q * Q
    rhs1 = M * R ** (2.0 - alpha) / (2.0 - alpha)
    lower = divergence_lower_bound(params.nu, params.R0, Q, alpha)

    quad_error = 0.0
    if grid.n % 2 == 0:
        coarse = RadialGrid(grid.n // 2, grid.R0)
        Qc, Mc = _chain_integrals(B[::2], R, alpha, coarse)
        quad_error = max(abs(Q * Q - Qc * Qc),
                         abs(M - Mc) * max(0.5 * (2.0 - alpha) * R,
                                           R ** (2.0 - alpha) / (2.0 - alpha)))
    return ChainValues(lhs0, rhs0, lhs1, rhs1, lower, quad_error)


def balance_residual_profile(state: RadialState, params: FluidParams,
                             grid: RadialGrid) -> np.ndarray:
    """``(2mu+lam) d_r(div u) - B (B_r + B/r)`` at interior nodes, zero elsewhere.

    ``d_r(div u)`` uses the face-divergence stencil of the implicit viscous
    solve, so a state produced by a step in vacuum balances to floor level.
    """
    r = grid.nodes
    out = np.zeros(grid.n + 1)
    lorentz = state.B[1:-1] * (ddr(state.B, grid)[1:-1] + state.B[1:-1] / r[1:-1])
    out[1:-1] = params.nu * apply_viscous(state.u, grid)[1:-1] - lorentz
    return out


def vacuum_residual(state: RadialState, tracker: VacuumTracker, params: FluidParams,
                    grid: RadialGrid, rho_vacuum: float = 0.0) -> float:
    """Max balance residual over interior nodes inside ``R(t)`` with ``rho <= rho_vacuum``."""
    if not tracker.active:
        return 0.0
    r = grid.nodes
    mask = (r > 0) & (r < tracker.R) & (state.rho <= rho_vacuum)
    mask[-1] = False
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(balance_residual_profile(state, params, grid)[mask])))


def make_record(state: RadialState, tracker: Optional[VacuumTracker], params: FluidParams,
                grid: RadialGrid, alpha: float, dt: float, rho_vacuum: float) -> DiagnosticsRecord:
    """Collect every monitored quantity; chain fields are 0 without an active tracker."""
    dv = div_u(state, grid)
    norm = weighted_l2(dv, grid)
    grad = float(np.max(np.abs(ddr(state.u, grid))))
    E = energy(state, params, grid)
    if tracker is not None and tracker.active:
        chain = inequality_chain(state, tracker, params, alpha, grid, divu_norm=norm)
        Q = magnetic_charge(state, tracker.R, grid)
        res = vacuum_residual(state, tracker, params, grid, rho_vacuum)
        R = tracker.R
    else:
        chain = ChainValues(0.0, 0.0, 0.0, 0.0, 0.0)
        Q = res = 0.0
        R = tracker.R if tracker is not None else 0.0
    return DiagnosticsRecord(t=state.t, Q=Q, E=E, divu_l2=norm,
                             keyc0_lhs=chain.keyc0_lhs, keyc0_rhs=chain.keyc0_rhs,
                             keyc1_lhs=chain.keyc1_lhs, keyc1_rhs=chain.keyc1_rhs,
                             divu_lower=chain.divu_lower, vac_residual=res, R=R,
                             max_grad_u=grad, dt=dt)
