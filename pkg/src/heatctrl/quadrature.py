"""Composite quadrature helpers used across the simulators.

Trapezoid rules carry the bulk of the work (smooth integrands on uniform
grids, with Richardson-style refinement checks).  Composite Gauss-Legendre
is used where an integrand has a sharp exponential boundary layer, with the
panel count tied to the fastest decay rate present.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "trapezoid",
    "trapezoid_refine_check",
    "gauss_legendre_panels",
]


def trapezoid(values: np.ndarray, dx: float) -> float:
    return float(np.trapezoid(values, dx=dx))


def trapezoid_refine_check(f, a: float, b: float, n: int = 1024):
    """Integrate f on [a, b] at n and 2n points; return (value, refine_delta).

    The returned value is the 2n-point result; refine_delta estimates the
    remaining quadrature error (one Richardson step for an O(h^2) rule).
    """
    xs1 = np.linspace(a, b, n + 1)
    xs2 = np.linspace(a, b, 2 * n + 1)
    v1 = np.trapezoid(f(xs1), dx=(b - a) / n)
    v2 = np.trapezoid(f(xs2), dx=(b - a) / (2 * n))
    return float(v2), abs(float(v2) - float(v1)) / 3.0


def gauss_legendre_panels(a: float, b: float, rate: float, order: int = 16,
                          min_panels: int = 4, max_nodes: int = 200_000):
    """Nodes and weights of composite Gauss-Legendre on [a, b].

    ``rate`` is the fastest exponential rate expected in the integrand;
    panels are sized so rate * panel_width <= 8, where a 16-point rule
    resolves exp to ~1e-14 relative.
    """
    width = b - a
    if width <= 0:
        raise ValueError("empty interval")
    panels = max(min_panels, int(np.ceil(abs(rate) * width / 8.0)))
    if panels * order > max_nodes:
        panels = max_nodes // order
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


