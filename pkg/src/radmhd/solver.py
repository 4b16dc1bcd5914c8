"""Operator-split time integration of the radial MHD system.

One step of size dt performs

1. first-order upwind finite-volume transport of ``rho`` (in the ``r dr``
   measure, so ``rho_t + (rho u)_r + rho u / r = 0`` is conservative) and of
   ``B`` (in the ``dr`` measure, ``B_t + (u B)_r = 0``);
2. upwind advection of ``u`` and the pressure-gradient and Lorentz kick;
3. a backward-Euler solve of ``rho~ u_t = (2mu+lam) (u_r + u/r)_r`` with
   velocity mass ``rho~ = max(rho, rho_floor)``.

The kick of step 2 is folded into the right-hand side of step 3 as
``rho~ u* + dt F`` rather than formed as ``u* + dt F / rho~``; the two are
algebraically identical but the latter loses digits when ``rho~`` sits at the
floor. Where ``rho = 0`` the implicit solve reduces to the quasi-static
balance ``(2mu+lam) (div u)_r = B (B_r + B/r)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.linalg import LinAlgError, solve_banded

from radmhd.core import (
    FluidParams,
    RadialGrid,
    RadialState,
    Scenario,
    VacuumTracker,
    build_initial_state,
    weighted_l2,
)

logger = logging.getLogger(__name__)

SourceFn = Callable[[np.ndarray, float], tuple[np.ndarray, np.ndarray, np.ndarray]]


class SolverError(RuntimeError):
    pass


class SingularSolveError(SolverError):
    """The implicit viscous system could not be factorized."""


class NonFiniteStateError(SolverError):
    """A step produced NaN or inf; treated upstream as breakdown."""


class TerminationKind(str, Enum):
    REACHED_T_END = "ReachedTEnd"
    BLOWUP_DETECTED = "BlowupDetected"
    DT_UNDERFLOW = "DtUnderflow"
    INVARIANT_VIOLATION = "InvariantViolation"


@dataclass(frozen=True)
class TerminationReason:
    kind: TerminationKind
    t: float
    value: float = math.nan
    detail: str = ""

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class StepReport:
    dt_used: float
    max_wave_speed: float
    viscous_solve_iters: int
    floored_nodes: int


def ddr(f: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """Centered first derivative, second-order one-sided at both ends."""
    return np.gradient(f, grid.h, edge_order=2)


def div_u(state_or_u, grid: RadialGrid) -> np.ndarray:
    """Radial divergence ``u_r + u/r``; equals ``2 u_r(0)`` at the center."""
    u = getattr(state_or_u, "u", state_or_u)
    r = grid.nodes
    du = ddr(u, grid)
    out = np.empty_like(du)
    out[1:] = du[1:] + u[1:] / r[1:]
    out[0] = 2.0 * du[0]
    return out


def lorentz_force(state_or_B, grid: RadialGrid) -> np.ndarray:
    """``-B (B_r + B/r)`` per node, zero at the center."""
    B = getattr(state_or_B, "B", state_or_B)
    r = grid.nodes
    out = np.zeros_like(B)
    out[1:] = -B[1:] * (ddr(B, grid)[1:] + B[1:] / r[1:])
    return out


def viscous_bands(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sub-, main and super-diagonal of ``(u_r + u/r)_r`` on interior nodes.

    Built from face divergences ``D_{i+1/2} = (r_{i+1} u_{i+1} - r_i u_i) /
    (r_{i+1/2} h)`` so that ``sum r_i h u_i (L u)_i = -sum r_{i+1/2} h D^2``.
    """
    r = grid.nodes
    h = grid.h
    rp = r[1:-1] + 0.5 * h
    rm = r[1:-1] - 0.5 * h
    lower = r[:-2] / (rm * h * h)
    upper = r[2:] / (rp * h * h)
    diag = -(r[1:-1] / rp + r[1:-1] / rm) / (h * h)
    return lower, diag, upper


def apply_viscous(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    lower, diag, upper = viscous_bands(grid)
    out = np.zeros_like(u)
    out[1:-1] = lower * u[:-2] + diag * u[1:-1] + upper * u[2:]
    return out


def solve_implicit_viscous(mass: np.ndarray, rhs: np.ndarray, coef: float, dt: float,
                           grid: RadialGrid) -> np.ndarray:
    """Solve ``mass u - dt coef L u = rhs`` with ``u(0) = u(R0) = 0``."""
    lower, diag, upper = viscous_bands(grid)
    m = grid.n - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -dt * coef * upper[:-1]
    ab[1, :] = mass[1:-1] - dt * coef * diag
    ab[2, :-1] = -dt * coef * lower[1:]
    u = np.zeros(grid.n + 1)
    try:
        u[1:-1] = solve_banded((1, 1), ab, rhs[1:-1], check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SingularSolveError(f"viscous system singular: {exc}") from exc
    return u


def face_velocity(u: np.ndarray) -> np.ndarray:
    return 0.5 * (u[:-1] + u[1:])


def transport_density(rho: np.ndarray, u: np.ndarray, dt: float,
                      grid: RadialGrid) -> np.ndarray:
    """Upwind update of ``rho_t + (rho u)_r + rho u/r = 0`` on dual cells."""
    uf = face_velocity(u)
    rf = grid.nodes[:-1] + 0.5 * grid.h
    donor = np.where(uf > 0, rho[:-1], rho[1:])
    flux = rf * uf * donor
    div = np.zeros_like(rho)
    div[:-1] += flux
    div[1:] -= flux
    return rho - dt * div / grid.cell_volumes


def transport_field(B: np.ndarray, u: np.ndarray, dt: float,
                    grid: RadialGrid) -> np.ndarray:
    """Upwind update of ``B_t + (u B)_r = 0`` on dual cells of length h.

    The face at ``h/2`` carries no flux, keeping ``B(0) = 0`` while the total
    ``sum w_i B_i`` is conserved exactly (the wall flux vanishes with ``u``).
    """
    uf = face_velocity(u)
    donor = np.where(uf > 0, B[:-1], B[1:])
    flux = uf * donor
    flux[0] = 0.0
    div = np.zeros_like(B)
    div[:-1] += flux
    div[1:] -= flux
    out = B - dt * div / grid.trapezoid_weights
    out[0] = 0.0
    return out


def upwind_gradient(f: np.ndarray, vel: np.ndarray, grid: RadialGrid) -> np.ndarray:
    back = np.zeros_like(f)
    fwd = np.zeros_like(f)
    back[1:] = (f[1:] - f[:-1]) / grid.h
    fwd[:-1] = (f[1:] - f[:-1]) / grid.h
    return np.where(vel > 0, back, fwd)


def total_mass(rho: np.ndarray, grid: RadialGrid) -> float:
    """``int rho r dr`` in the dual-cell measure that the update conserves."""
    return float(np.dot(grid.cell_volumes, rho))


def step(state: RadialState, params: FluidParams, grid: RadialGrid, dt: float,
         rho_floor: float = 1e-10, sources: Optional[SourceFn] = None
         ) -> tuple[RadialState, StepReport]:
    """Advance the state by ``dt``; see the module docstring for the splitting."""
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    r = grid.nodes
    u = state.u

    rho = transport_density(state.rho, u, dt, grid)
    B = transport_field(state.B, u, dt, grid)
    if sources is not None:
        s_rho, _, s_B = sources(r, state.t + 0.5 * dt)
        rho = rho + dt * s_rho
        B = B + dt * s_B
        B[0] = 0.0

    mass = np.maximum(rho, rho_floor)
    u_adv = u - dt * u * upwind_gradient(u, u, grid)
    force = -ddr(params.pressure(rho), grid) + lorentz_force(B, grid)
    if sources is not None:
        force = force + sources(r, state.t + dt)[1]
    rhs = mass * u_adv + dt * force
    u_new = solve_implicit_viscous(mass, rhs, params.nu, dt, grid)

    new = RadialState(state.t + dt, rho, u_new, B)
    if not new.is_finite():
        raise NonFiniteStateError(f"non-finite state after step at t={new.t:.6g}")
    report = StepReport(dt_used=dt,
                        max_wave_speed=wave_speed(state, params, rho_floor),
                        viscous_solve_iters=1,
                        floored_nodes=int(np.count_nonzero(rho < rho_floor)))
    return new, report


def wave_speed(state: RadialState, params: FluidParams, rho_floor: float = 1e-10) -> float:
    """``max |u| + c_s + |B| / sqrt(max(rho, floor))`` over nodes."""
    alfven = np.abs(state.B) / np.sqrt(np.maximum(state.rho, rho_floor))
    return float(np.max(np.abs(state.u) + params.sound_speed(state.rho) + alfven))


def stable_dt(state: RadialState, params: FluidParams, grid: RadialGrid, cfl: float,
              rho_floor: float = 1e-10, dt_max: float = math.inf) -> float:
    """CFL step from the fastest signal; viscosity is implicit and imposes none."""
    speed = wave_speed(state, params, rho_floor)
    if speed <= 0:
        return dt_max
    return min(cfl * grid.h / speed, dt_max)


@dataclass(frozen=True)
class RunSummary:
    """Scalar outcome of a run, reported next to the lifespan bound."""

    T_obs: float
    E0: float
    C0: float
    alpha: float
    steps: int
    min_dt: float
    max_energy_increase: float
    divu_sq_integral: float
    max_divu: float
    chain_violations: int
    wall_time: float


@dataclass
class RunResult:
    records: list
    termination: TerminationReason
    summary: RunSummary
    final_state: RadialState
    energy_trace: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])


def simulate(scenario: Scenario, record_every_step: bool = False) -> RunResult:
    """Drive ``step`` to the horizon or to breakdown, collecting diagnostics.

    Breakdown is declared when ``max |u_r|`` exceeds the scenario threshold or
    a step goes non-finite; a CFL step under ``dt_min`` ends the run as
    ``DtUnderflow``; a singular viscous solve or negative density is an
    ``InvariantViolation``. A record is kept at ``t = 0``, every
    ``output_every`` steps and at termination.
    """
    from radmhd.bound import optimal_alpha
    from radmhd.diagnostics import (
        advance_vacuum_radius,
        energy,
        inequality_chain,
        magnetic_charge,
        make_record,
    )

    started = time.perf_counter()
    grid = scenario.grid
    params = scenario.params
    alpha = scenario.alpha if scenario.alpha is not None else optimal_alpha()
    state = build_initial_state(scenario, grid)
    tracker = VacuumTracker(scenario.r0) if scenario.r0 is not None else None
    C0 = abs(magnetic_charge(state, scenario.r0, grid)) if tracker is not None else 0.0

    def next_dt(s: RadialState) -> float:
        dt = stable_dt(s, params, grid, scenario.cfl, scenario.wave_floor, scenario.max_step)
        return min(dt, scenario.t_end - s.t)

    def record(s: RadialState, dt: float):
        return make_record(s, tracker, params, grid, alpha, dt, scenario.rho_floor)

    E0 = energy(state, params, grid)
    energies = [E0]
    dt = next_dt(state)
    records = [record(state, dt)]
    steps = 0
    min_dt = math.inf
    max_rise = 0.0
    divu_sq = 0.0
    divu_prev = weighted_l2(div_u(state, grid), grid)
    max_divu = float(np.max(np.abs(div_u(state, grid))))
    violations = 0
    termination: Optional[TerminationReason] = None

    while termination is None:
        if dt < scenario.dt_min and scenario.t_end - state.t > scenario.dt_min:
            termination = TerminationReason(TerminationKind.DT_UNDERFLOW, state.t, dt,
                                            f"CFL step {dt:.3g} below dt_min")
            break
        try:
            new, _ = step(state, params, grid, dt, scenario.rho_floor, scenario.sources)
        except NonFiniteStateError as exc:
            termination = TerminationReason(TerminationKind.BLOWUP_DETECTED, state.t + dt,
                                            math.inf, str(exc))
            break
        except SingularSolveError as exc:
            termination = TerminationReason(TerminationKind.INVARIANT_VIOLATION, state.t,
                                            math.nan, str(exc))
            break
        if np.any(new.rho < 0):
            termination = TerminationReason(TerminationKind.INVARIANT_VIOLATION, new.t,
                                            float(new.rho.min()), "negative density")
            break

        if tracker is not None:
            tracker = advance_vacuum_radius(tracker, state, dt, grid)
        dv = div_u(new, grid)
        divu_new = weighted_l2(dv, grid)
        divu_sq += 0.5 * dt * (divu_prev ** 2 + divu_new ** 2)
        divu_prev = divu_new
        max_divu = max(max_divu, float(np.max(np.abs(dv))))
        E = energy(new, params, grid)
        if scenario.sources is None and energies[-1] > 0:
            max_rise = max(max_rise, (E - energies[-1]) / energies[-1])
        energies.append(E)
        state = new
        steps += 1
        min_dt = min(min_dt, dt)
        if tracker is not None and tracker.active:
            chain = inequality_chain(state, tracker, params, alpha, grid, divu_norm=divu_new)
            violations += int(not (chain.keyc0_holds and chain.keyc1_holds))

        grad = float(np.max(np.abs(ddr(state.u, grid))))
        if grad > scenario.blowup_grad_threshold:
            termination = TerminationReason(TerminationKind.BLOWUP_DETECTED, state.t, grad,
                                            "max |u_r| above threshold")
        elif state.t >= scenario.t_end * (1.0 - 1e-14):
            termination = TerminationReason(TerminationKind.REACHED_T_END, state.t, state.t)
        else:
            dt = next_dt(state)
            if record_every_step or steps % scenario.output_every == 0:
                records.append(record(state, dt))

    if records[-1].t != state.t or len(records) == 1:
        records.append(record(state, min(dt, scenario.max_step)))
    if termination.kind is not TerminationKind.REACHED_T_END:
        logger.info("run %s ended with %s at t=%.6g (%s)", scenario.preset,
                    termination.kind.value, termination.t, termination.detail)
    summary = RunSummary(T_obs=termination.t, E0=E0, C0=C0, alpha=alpha, steps=steps,
                         min_dt=min_dt, max_energy_increase=max_rise,
                         divu_sq_integral=divu_sq, max_divu=max_divu,
                         chain_violations=violations,
                         wall_time=time.perf_counter() - started)
    return RunResult(records, termination, summary, state, np.asarray(energies))


def run(scenario: Scenario) -> tuple[list, TerminationReason]:
    """Diagnostics time series and the reason the run stopped."""
    result = simulate(scenario)
    return result.records, result.termination
