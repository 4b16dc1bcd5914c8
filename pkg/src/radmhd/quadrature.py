"""Trapezoid-type quadratures on the radial grid, including partial intervals.

Integrands with a fractional power weight ``r**beta`` (``beta > -1``) are
handled by product integration: the smooth factor is interpolated linearly on
each cell and the weight is integrated exactly. For ``beta = 0`` this is the
composite trapezoid rule.
"""

from __future__ import annotations

import numpy as np

from radmhd.core import RadialGrid


def truncate(values: np.ndarray, R: float, grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Nodes in ``[0, R]`` plus ``R`` itself, with values linearly interpolated there."""
    r = grid.nodes
    if R >= grid.R0:
        return r.copy(), np.asarray(values, dtype=float).copy()
    k = int(np.searchsorted(r, R, side="right"))
    nodes = np.append(r[:k], R)
    vals = np.append(values[:k], np.interp(R, r, values))
    if nodes[-1] == nodes[-2]:
        nodes, vals = nodes[:-1], vals[:-1]
    return nodes, vals


def trapezoid_nodes(nodes: np.ndarray, vals: np.ndarray) -> float:
    if len(nodes) < 2:
        return 0.0
    return float(np.sum(0.5 * np.diff(nodes) * (vals[1:] + vals[:-1])))


def integrate_to(values: np.ndarray, R: float, grid: RadialGrid) -> float:
    """``int_0^R f dr`` by trapezoid, the partial cell at ``R`` interpolated."""
    return trapezoid_nodes(*truncate(values, R, grid))


def power_moments(nodes: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``(w_left, w_right)`` with ``int_a^b r^beta g ~ w_l g(a) + w_r g(b)``."""
    a = nodes[:-1]
    b = nodes[1:]
    width = b - a
    m0 = (b ** (beta + 1) - a ** (beta + 1)) / (beta + 1)
    m1 = (b ** (beta + 2) - a ** (beta + 2)) / (beta + 2)
    w_right = (m1 - a * m0) / width
    w_left = m0 - w_right
    return w_left, w_right


def power_weighted(nodes: np.ndarray, vals: np.ndarray, beta: float) -> float:
    """``int r^beta g(r) dr`` over the node span with ``g`` piecewise linear."""
    if len(nodes) < 2:
        return 0.0
    if beta <= -1:
        raise ValueError(f"weight r^{beta} is not integrable at 0")
    w_l, w_r = power_moments(nodes, beta)
    return float(np.dot(w_l, vals[:-1]) + np.dot(w_r, vals[1:]))


def power_weighted_to(values: np.ndarray, beta: float, R: float, grid: RadialGrid) -> float:
    return power_weighted(*truncate(values, R, grid), beta)
