"""Closed-form blowup-bound calculus for the multiplier ``f(r) = (R - r) r^alpha``.

For ``1 < alpha < 2`` the weighted Cauchy-Schwarz constant is

    K(alpha) = alpha / sqrt(2 alpha - 2) + (alpha + 1) / sqrt(2 alpha)

and a conserved vacuum charge ``C0 = |int_0^r0 B0 dr|`` forces

    ||div u|| >= C0^2 (2 - alpha)^2 / (2 (2mu + lam) R0 K(alpha)),

whence a lifespan bound ``T_max = E0 / lower^2``. Every constant hidden by a
``<~`` is taken as 1, so ``T_max`` is meaningful as a ratio, not absolutely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from radmhd.core import FluidParams, RadialGrid
from radmhd.quadrature import power_weighted

ALPHA_LO = 1.0 + 1e-6
ALPHA_HI = 2.0 - 1e-6
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateBoundError(ValueError):
    """The bound carries no information (zero charge or bad exponent)."""


@dataclass(frozen=True)
class BlowupBoundResult:
    alpha: float
    K_alpha: float
    divu_lower: float
    T_max: float
    C0: float
    E0: float

    @property
    def T_max_disc(self) -> float:
        """Lifespan bound if ``||div u||`` carries the 2*pi disc factor."""
        return self.T_max / (2.0 * math.pi)

    def as_row(self) -> dict[str, float]:
        return {"alpha": self.alpha, "K": self.K_alpha, "divu_lower": self.divu_lower,
                "T_max": self.T_max, "T_max_disc": self.T_max_disc}


def _check_alpha(alpha: float) -> None:
    if not (1.0 < alpha < 2.0):
        raise DegenerateBoundError(f"alpha must lie strictly in (1, 2), got {alpha}")


def k_alpha(alpha: float) -> float:
    _check_alpha(alpha)
    return alpha / math.sqrt(2.0 * alpha - 2.0) + (alpha + 1.0) / math.sqrt(2.0 * alpha)


def bound_shape(alpha: float) -> float:
    """``(2 - alpha)^2 / K(alpha)``, the alpha-dependent factor of the lower bound."""
    return (2.0 - alpha) ** 2 / k_alpha(alpha)


def divergence_lower_bound(nu: float, R0: float, C0: float, alpha: float) -> float:
    return C0 * C0 * bound_shape(alpha) / (2.0 * nu * R0)


def lifespan_bound(params: FluidParams, C0: float, E0: float, alpha: float) -> BlowupBoundResult:
    """Divergence lower bound and lifespan bound at a fixed exponent."""
    _check_alpha(alpha)
    if C0 == 0 or not math.isfinite(C0):
        raise DegenerateBoundError("C0 = 0: no blowup conclusion")
    if not E0 > 0:
        raise DegenerateBoundError(f"E0 must be > 0, got {E0}")
    lower = divergence_lower_bound(params.nu, params.R0, abs(C0), alpha)
    return BlowupBoundResult(alpha=alpha, K_alpha=k_alpha(alpha), divu_lower=lower,
                             T_max=E0 / lower ** 2, C0=abs(C0), E0=E0)


def golden_section_max(fn: Callable[[float], float], lo: float, hi: float,
                       tol: float = 1e-10, max_iter: int = 200) -> float:
    """Maximizer of a unimodal ``fn`` on ``[lo, hi]`` to bracket width ``tol``."""
    a, b = lo, hi
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = fn(x1), fn(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = fn(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = fn(x1)
    return 0.5 * (a + b)


def optimal_alpha(tol: float = 1e-10) -> float:
    """Exponent maximizing ``(2 - alpha)^2 / K(alpha)``; independent of all data."""
    return golden_section_max(bound_shape, ALPHA_LO, ALPHA_HI, tol=tol)


def optimize_alpha(params: FluidParams, C0: float, E0: float,
                   tol: float = 1e-10) -> BlowupBoundResult:
    """Best lifespan bound over ``alpha``. The objective factorizes as
    ``C0^2 * shape(alpha)``, so the argmax ignores ``C0``, ``E0``, ``R0`` and ``nu``."""
    if C0 == 0:
        raise DegenerateBoundError("C0 = 0: no blowup conclusion")
    return lifespan_bound(params, C0, E0, optimal_alpha(tol))


def bound_table(params: FluidParams, C0: float, E0: float,
                alphas: Optional[np.ndarray] = None) -> list[BlowupBoundResult]:
    if alphas is None:
        alphas = np.linspace(1.1, 1.9, 9)
    return [lifespan_bound(params, C0, E0, float(a)) for a in alphas]


@dataclass(frozen=True)
class MultiplierCheck:
    lhs: float
    rhs: float
    defect: float


def multiplier_identity_check(B: np.ndarray, u: np.ndarray, R: float, alpha: float,
                              params: FluidParams, grid: RadialGrid) -> MultiplierCheck:
    """Both sides of the balance tested against ``f = R r^alpha - r^(alpha+1)``.

    The viscous side is taken after integration by parts,
    ``-(2mu+lam) int (alpha R r^(alpha-1) - (alpha+1) r^alpha) div u dr``, so no
    second derivative of ``u`` is needed. The magnetic side is
    ``int f (d_r(B^2/2) + B^2/r) dr``. Fractional powers of ``r`` are
    integrated by product quadrature.
    """
    from radmhd.quadrature import truncate
    from radmhd.solver import ddr, div_u

    _check_alpha(alpha)
    nodes, dv = truncate(div_u(u, grid), R, grid)
    _, Bv = truncate(B, R, grid)
    _, dB = truncate(ddr(B, grid), R, grid)
    lhs = -params.nu * (alpha * R * power_weighted(nodes, dv, alpha - 1.0)
                        - (alpha + 1.0) * power_weighted(nodes, dv, alpha))
    bbr = Bv * dB
    b2 = Bv * Bv
    rhs = (R * power_weighted(nodes, bbr, alpha) - power_weighted(nodes, bbr, alpha + 1.0)
           + R * power_weighted(nodes, b2, alpha - 1.0) - power_weighted(nodes, b2, alpha))
    return MultiplierCheck(lhs=lhs, rhs=rhs, defect=abs(lhs - rhs))


@dataclass(frozen=True)
class CriterionResult:
    value: float
    applicable: bool
    reason: str = ""
    gradient_factor: float = math.nan
    inverse_factor: float = math.nan


def _local_exponent(r: np.ndarray, g: np.ndarray) -> float:
    """Power ``p`` with ``g ~ c r^p`` from the first two positive nodes."""
    if g[1] <= 0 or g[2] <= 0:
        return math.nan
    return math.log(g[2] / g[1]) / math.log(r[2] / r[1])


def generic_criterion(f: Callable[[np.ndarray], np.ndarray], R: float, grid: RadialGrid,
                      fprime: Optional[Callable[[np.ndarray], np.ndarray]] = None
                      ) -> CriterionResult:
    """``(int |f'|^2 / r dr)^(1/2) * int (f/r - f'/2)^(-1) dr`` over ``[0, R]``.

    Both integrands may be singular at ``r = 0``. The part on ``[h/2, R]`` is
    integrated by trapezoid; the first half cell is extrapolated from the
    local power law through the first two nodes. A non-integrable power, or a
    non-positive ``f/r - f'/2``, makes the criterion inapplicable.
    """
    sub = RadialGrid(grid.n, R)
    h = sub.h
    r = sub.nodes
    fv = np.asarray(f(r), dtype=float)
    if fprime is None:
        eps = 1e-6 * R
        rc = np.clip(r, eps, R - eps)
        dfv = (np.asarray(f(rc + eps)) - np.asarray(f(rc - eps))) / (2.0 * eps)
    else:
        dfv = np.asarray(fprime(r), dtype=float)
    inner = r[1:-1]
    positivity = fv[1:-1] / inner - 0.5 * dfv[1:-1]
    if np.any(positivity <= 0) or not np.all(np.isfinite(positivity)):
        return CriterionResult(math.nan, False, "f/r - f'/2 not positive on (0, R)")

    grad_int = dfv * dfv / np.where(r > 0, r, 1.0)
    grad_int[0] = np.nan
    p_grad = _local_exponent(r, grad_int)
    if not math.isfinite(p_grad) or p_grad <= -1.0 + 1e-3:
        return CriterionResult(math.nan, False, "int |f'|^2 / r diverges at r = 0")
    inv_int = np.full_like(r, np.nan)
    inv_int[1:-1] = 1.0 / positivity
    p_inv = _local_exponent(r, inv_int)
    if not math.isfinite(p_inv) or p_inv <= -1.0 + 1e-3:
        return CriterionResult(math.nan, False, "int (f/r - f'/2)^-1 diverges at r = 0")

    scale = max(1.0, float(np.abs(fv).max()))
    if abs(fv[0]) > 1e-12 * scale or abs(fv[-1]) > 1e-12 * scale:
        return CriterionResult(math.nan, False, "f must vanish at 0 and R")
    # f vanishes at R, so f/r - f'/2 -> -f'(R)/2 there
    inv_end = -0.5 * dfv[-1]
    if inv_end <= 0:
        return CriterionResult(math.nan, False, "f/r - f'/2 not positive at r = R")
    inv_int[-1] = 1.0 / inv_end

    def head(g: np.ndarray, p: float) -> float:
        # int_0^{h/2} c r^p with c from g(h), plus trapezoid on [h/2, h]
        c = g[1] / r[1] ** p
        g_half = c * (0.5 * h) ** p
        return c * (0.5 * h) ** (p + 1.0) / (p + 1.0) + 0.25 * h * (g_half + g[1])

    def body(g: np.ndarray) -> float:
        return float(np.sum(0.5 * h * (g[2:] + g[1:-1])))

    grad_factor = math.sqrt(head(grad_int, p_grad) + body(grad_int))
    inv_factor = head(inv_int, p_inv) + body(inv_int)
    return CriterionResult(grad_factor * inv_factor, True, "", grad_factor, inv_factor)


def power_multiplier(alpha: float, R: float) -> tuple[Callable, Callable]:
    """``f = (R - r) r^alpha`` and its derivative."""

    def f(r):
        return (R - r) * np.power(r, alpha)

    def fprime(r):
        with np.errstate(divide="ignore", invalid="ignore"):
            return alpha * R * np.power(r, alpha - 1.0) - (alpha + 1.0) * np.power(r, alpha)

    return f, fprime


def criterion_scaling(alpha: float, radii: list[float], n: int = 400) -> tuple[list[float], float]:
    """Criterion for ``(R - r) r^alpha`` at several radii and its fitted R-exponent."""
    values = []
    for R in radii:
        f, fp = power_multiplier(alpha, R)
        res = generic_criterion(f, R, RadialGrid(n, R), fprime=fp)
        if not res.applicable:
            raise DegenerateBoundError(res.reason)
        values.append(res.value)
    slope = float(np.polyfit(np.log(radii), np.log(values), 1)[0])
    return values, slope
