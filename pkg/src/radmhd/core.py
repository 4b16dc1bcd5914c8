"""Domain types, grid, initial data and quadrature conventions.

All fields live on a uniform collocated grid ``r_i = i*h``, ``i = 0..n`` over
``[0, R0]``. Two integral conventions are used throughout the package:

* the *weighted* half-line norm ``(int_0^R0 g^2 r dr)^(1/2)`` with no 2*pi
  factor, used by every inequality check;
* the *physical* measure ``2*pi*r dr`` used only for the total energy.

Quadrature is composite trapezoid everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

Profile = Callable[[np.ndarray], np.ndarray]
ProfileSpec = Union[str, Profile, np.ndarray, Path]

PRESETS = ("uniform", "vacuum-ball", "manufactured-smooth")


class ConfigurationError(ValueError):
    """Invalid parameters, profiles or scenario settings."""


@dataclass(frozen=True)
class FluidParams:
    """Physical constants of the barotropic MHD system.

    Args:
        mu: Shear viscosity, must be positive.
        lam: Bulk viscosity; ``lam + mu >= 0`` is required.
        a_pressure: Constant in ``p = a * rho**gamma``.
        gamma: Adiabatic exponent, ``gamma > 1``.
        R0: Radius of the disc.
    """

    mu: float = 1.0
    lam: float = 1.0
    a_pressure: float = 1.0
    gamma: float = 2.0
    R0: float = 1.0

    def __post_init__(self) -> None:
        values = (self.mu, self.lam, self.a_pressure, self.gamma, self.R0)
        if not all(math.isfinite(v) for v in values):
            raise ConfigurationError(f"non-finite fluid parameter in {values}")
        if self.mu <= 0:
            raise ConfigurationError(f"mu must be > 0, got {self.mu}")
        if self.lam + self.mu < 0:
            raise ConfigurationError(
                f"lambda + mu must be >= 0, got {self.lam + self.mu}")
        if self.gamma <= 1:
            raise ConfigurationError(f"gamma must be > 1, got {self.gamma}")
        if self.a_pressure <= 0:
            raise ConfigurationError(
                f"a_pressure must be > 0, got {self.a_pressure}")
        if self.R0 <= 0:
            raise ConfigurationError(f"R0 must be > 0, got {self.R0}")

    @property
    def nu(self) -> float:
        """Longitudinal viscosity ``2*mu + lambda``."""
        return 2.0 * self.mu + self.lam

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        return self.a_pressure * np.power(np.maximum(rho, 0.0), self.gamma)

    def sound_speed(self, rho: np.ndarray) -> np.ndarray:
        rho = np.maximum(rho, 0.0)
        return np.sqrt(self.gamma * self.a_pressure * np.power(rho, self.gamma - 1.0))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes ``r_i = i*R0/n`` including both endpoints."""

    n: int
    R0: float = 1.0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 16:
            raise ConfigurationError(f"grid needs n >= 16 cells, got {self.n}")
        if self.R0 <= 0:
            raise ConfigurationError(f"R0 must be > 0, got {self.R0}")

    @property
    def h(self) -> float:
        return self.R0 / self.n

    # cached arrays are read-only so callers cannot corrupt a shared grid

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen(np.linspace(0.0, self.R0, self.n + 1))

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return _frozen(w)

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        """Exact ``int r dr`` over the dual cell around each node."""
        r = self.nodes
        lo = np.maximum(r - 0.5 * self.h, 0.0)
        hi = np.minimum(r + 0.5 * self.h, self.R0)
        return _frozen(0.5 * (hi * hi - lo * lo))

    def refine(self) -> "RadialGrid":
        return RadialGrid(2 * self.n, self.R0)


@dataclass
class RadialState:
    """Profiles of density, radial velocity and azimuthal field at time t."""

    t: float
    rho: np.ndarray
    u: np.ndarray
    B: np.ndarray

    def copy(self) -> "RadialState":
        return RadialState(self.t, self.rho.copy(), self.u.copy(), self.B.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.rho)) and np.all(np.isfinite(self.u))
                    and np.all(np.isfinite(self.B)))

    def validate(self, grid: RadialGrid, atol: float = 0.0) -> None:
        """Raise ``ValueError`` if any state invariant is broken."""
        for name in ("rho", "u", "B"):
            arr = getattr(self, name)
            if arr.shape != (grid.n + 1,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({grid.n + 1},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(self.rho < 0):
            raise ValueError(f"negative density, min {self.rho.min():.3e}")
        if abs(self.u[0]) > atol or abs(self.u[-1]) > atol:
            raise ValueError("velocity must vanish at r=0 and r=R0")
        if abs(self.B[0]) > atol:
            raise ValueError("B must vanish at r=0")


@dataclass
class VacuumTracker:
    """Particle path ``R(t)`` bounding the vacuum ball ``[0, R(t)]``."""

    R: float
    active: bool = True


@dataclass
class Scenario:
    """Everything needed to start and drive one simulation.

    ``rho0``, ``u0`` and ``B0`` are callables of ``r``; the special string
    ``"compatible"`` for ``u0`` asks for the velocity in viscous balance with
    the initial pressure and Lorentz force (see :func:`build_compatible_u0`).
    ``sources`` is only set by the manufactured-solution preset.
    """

    params: FluidParams
    n: int
    rho0: Profile
    u0: Union[Profile, str]
    B0: Profile
    t_end: float
    r0: Optional[float] = None
    cfl: float = 0.4
    rho_floor: float = 1e-10
    blowup_grad_threshold: float = 1e6
    output_every: int = 10
    alpha: Optional[float] = None
    dt_min: float = 1e-12
    dt_max: Optional[float] = None
    alfven_floor: Optional[float] = None
    preset: str = "custom"
    blowup: bool = False
    sources: Optional[Callable] = field(default=None, repr=False)
    exact: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.t_end <= 0:
            raise ConfigurationError(f"t_end must be > 0, got {self.t_end}")
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.rho_floor <= 0:
            raise ConfigurationError(f"rho_floor must be > 0, got {self.rho_floor}")
        if self.blowup_grad_threshold <= 0:
            raise ConfigurationError("blowup_grad_threshold must be > 0")
        if self.output_every < 1:
            raise ConfigurationError("output_every must be >= 1")
        if self.r0 is not None and not 0 < self.r0 < self.params.R0:
            raise ConfigurationError(
                f"r0 must lie in (0, R0={self.params.R0}), got {self.r0}")
        if self.alfven_floor is not None and not self.alfven_floor > 0:
            raise ConfigurationError(f"alfven_floor must be > 0, got {self.alfven_floor}")
        if self.alpha is not None and not 1 < self.alpha < 2:
            raise ConfigurationError(f"alpha must lie in (1, 2), got {self.alpha}")
        RadialGrid(self.n, self.params.R0)

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid(self.n, self.params.R0)

    @property
    def wave_floor(self) -> float:
        """Density floor used in the Alfven speed of the CFL estimate."""
        return self.alfven_floor if self.alfven_floor is not None else self.rho_floor

    @property
    def max_step(self) -> float:
        return self.dt_max if self.dt_max is not None else self.t_end / 100.0

    def with_resolution(self, n: int) -> "Scenario":
        return replace(self, n=n)


def trapezoid(values: np.ndarray, grid: RadialGrid) -> float:
    return float(np.dot(grid.trapezoid_weights, values))


def weighted_l2(g: np.ndarray, grid: RadialGrid) -> float:
    """Half-line norm ``(int_0^R0 g^2 r dr)^(1/2)``, no 2*pi factor."""
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("weighted_l2: profile contains non-finite values")
    return math.sqrt(trapezoid(g * g * grid.nodes, grid))


def load_tabulated(path: Union[str, Path]) -> Profile:
    """Two-column ``r value`` text file, linearly interpolated."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    if data.shape[1] < 2:
        raise ConfigurationError(f"{path}: expected two columns (r, value)")
    r, v = data[:, 0], data[:, 1]
    if np.any(np.diff(r) <= 0):
        raise ConfigurationError(f"{path}: r column must be strictly increasing")
    r_lo, r_hi = r[0], r[-1]

    def profile(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(x < r_lo - 1e-12) or np.any(x > r_hi + 1e-12):
            raise ConfigurationError(
                f"{path}: tabulated on [{r_lo}, {r_hi}], evaluated outside")
        return np.interp(x, r, v)

    return profile


def sample(profile: ProfileSpec, grid: RadialGrid, name: str) -> np.ndarray:
    if isinstance(profile, (str, Path)):
        profile = load_tabulated(profile)
    if callable(profile):
        values = np.asarray(profile(grid.nodes), dtype=float)
        values = np.broadcast_to(values, grid.nodes.shape).copy()
    else:
        values = np.asarray(profile, dtype=float).copy()
        if values.shape != grid.nodes.shape:
            raise ConfigurationError(
                f"{name}: tabulated values have shape {values.shape}, "
                f"grid needs {grid.nodes.shape}")
    if not np.all(np.isfinite(values)):
        bad = grid.nodes[~np.isfinite(values)][0]
        raise ConfigurationError(f"{name}: profile undefined at r={bad:.6g}")
    return values


def build_compatible_u0(params: FluidParams, rho0: ProfileSpec, B0: ProfileSpec,
                        grid: RadialGrid) -> np.ndarray:
    """Velocity in viscous balance with the initial pressure and Lorentz force.

    Solves ``(2mu+lam) (u' + u/r)' = p(rho0)' + B0 (B0' + B0/r)`` with
    ``u(0) = u(R0) = 0``. With ``G(r) = p(r) - p(0) + B0^2/2 + int_0^r B0^2/s ds + c``
    the solution is ``u(r) = int_0^r s G(s) ds / (r (2mu+lam))``, and ``c``
    follows from the outer boundary condition since ``u`` is affine in ``c``.
    """
    r = grid.nodes
    rho = sample(rho0, grid, "rho0")
    B = sample(B0, grid, "B0")
    if abs(B[0]) > 0:
        raise ConfigurationError("B0(0) must be 0 (center regularity)")

    with np.errstate(divide="ignore", invalid="ignore"):
        hoop = np.where(r > 0, B * B / np.where(r > 0, r, 1.0), 0.0)
    p = params.pressure(rho)
    G0 = p - p[0] + 0.5 * B * B + _cumtrapz(hoop, grid.h)
    moment0 = _cumtrapz(r * G0, grid.h)
    moment1 = 0.5 * r * r
    c = -moment0[-1] / moment1[-1]
    u = np.zeros_like(r)
    u[1:] = (moment0[1:] + c * moment1[1:]) / (r[1:] * params.nu)
    u[-1] = 0.0
    return u


def _cumtrapz(f: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * h * (f[1:] + f[:-1]))
    return out


def build_initial_state(scenario: Scenario, grid: Optional[RadialGrid] = None) -> RadialState:
    """Sample the scenario's profiles and enforce the boundary conditions."""
    grid = grid or scenario.grid
    r = grid.nodes
    rho = sample(scenario.rho0, grid, "rho0")
    B = sample(scenario.B0, grid, "B0")
    if np.any(rho < 0):
        raise ConfigurationError("rho0 must be non-negative")
    if abs(B[0]) > 1e-14:
        raise ConfigurationError(
            f"B0(0) = {B[0]:.3g} violates center regularity (B must vanish at r=0)")
    B[0] = 0.0
    if scenario.r0 is not None:
        inside = r <= scenario.r0
        if np.any(rho[inside] > 0):
            raise ConfigurationError(
                f"vacuum requested on [0, {scenario.r0}] but rho0 > 0 there")
        rho[inside] = 0.0
        if scenario.blowup:
            k = int(np.count_nonzero(inside))
            nodes = np.append(r[:k], scenario.r0)
            vals = np.append(B[:k], np.interp(scenario.r0, r, B))
            charge = float(np.sum(0.5 * np.diff(nodes) * (vals[1:] + vals[:-1])))
            if charge == 0.0:
                raise ConfigurationError(
                    "blowup scenario needs a nonzero vacuum charge int_0^r0 B0 dr")
    if isinstance(scenario.u0, str):
        if scenario.u0 != "compatible":
            raise ConfigurationError(f"unknown velocity profile {scenario.u0!r}")
        u = build_compatible_u0(scenario.params, rho, B, grid)
    else:
        u = sample(scenario.u0, grid, "u0")
    u[0] = 0.0
    u[-1] = 0.0
    return RadialState(0.0, rho, u, B)


def vacuum_ball_profiles(r0: float, R0: float, rho_bar: float = 1.0,
                         b_amp: float = 1.0) -> tuple[Profile, Profile]:
    """Density ramp outside ``r0`` and ``B0 = b sin^2(pi r / r0)`` inside."""

    def rho0(r: np.ndarray) -> np.ndarray:
        s = np.clip((r - r0) / (R0 - r0), 0.0, None)
        return rho_bar * s * s

    def B0(r: np.ndarray) -> np.ndarray:
        return np.where(r <= r0, b_amp * np.sin(np.pi * r / r0) ** 2, 0.0)

    return rho0, B0


# the vacuum ball needs n >= 256 to resolve the field spike on the axis
# up to its breakdown threshold
DEFAULT_RESOLUTION = {"uniform": 128, "vacuum-ball": 256, "manufactured-smooth": 64}


def make_preset(name: str, params: Optional[FluidParams] = None, n: Optional[int] = None,
                t_end: float = 0.1, r0: Optional[float] = None, **kwargs) -> Scenario:
    """Build one of the named scenarios.

    ``uniform`` is the constant-density rest state, ``vacuum-ball`` carries an
    interior vacuum with a nontrivial field (requires ``r0``), and
    ``manufactured-smooth`` is a forced problem with a known exact solution.
    """
    params = params or FluidParams()
    if n is None:
        n = DEFAULT_RESOLUTION.get(name, 128)
    if name == "uniform":
        rho_bar = kwargs.pop("rho_bar", 1.0)
        return Scenario(params=params, n=n, rho0=lambda r: np.full_like(r, rho_bar),
                        u0=lambda r: np.zeros_like(r), B0=lambda r: np.zeros_like(r),
                        t_end=t_end, r0=None, preset=name, **kwargs)
    if name == "vacuum-ball":
        if r0 is None:
            raise ConfigurationError("preset 'vacuum-ball' requires r0")
        if not 0 < r0 < params.R0:
            raise ConfigurationError(f"r0 must lie in (0, R0={params.R0}), got {r0}")
        rho_bar = kwargs.pop("rho_bar", 1.0)
        b_amp = kwargs.pop("b_amp", 1.0)
        if b_amp == 0:
            raise ConfigurationError("vacuum-ball needs a nonzero field amplitude")
        rho0, B0 = vacuum_ball_profiles(r0, params.R0, rho_bar, b_amp)
        # vacuum nodes are overdamped by the implicit solve; a floor at the fluid
        # density keeps the CFL step from collapsing to the density floor
        kwargs.setdefault("alfven_floor", rho_bar)
        kwargs.setdefault("blowup_grad_threshold", 100.0)
        return Scenario(params=params, n=n, rho0=rho0, u0="compatible", B0=B0,
                        t_end=t_end, r0=r0, preset=name, blowup=True, **kwargs)
    if name == "manufactured-smooth":
        from radmhd.manufactured import manufactured_scenario

        return manufactured_scenario(params=params, n=n, t_end=t_end, **kwargs)
    raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")
