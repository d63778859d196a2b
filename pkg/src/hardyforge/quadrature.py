"""Shared quadrature rules: Gauss-Legendre on intervals and product rules on spheres."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gamma as _gamma


def unit_sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * np.pi ** (n / 2.0) / _gamma(n / 2.0)


@lru_cache(maxsize=64)
def _leggauss(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(m)


def gauss_legendre(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the m-point Gauss-Legendre rule on [a, b]."""
    x, w = _leggauss(m)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=64)
def _sphere_rule(n: int, m: int, upper_only: bool) -> tuple[np.ndarray, np.ndarray]:
    if n == 2:
        if upper_only:
            phi, w = gauss_legendre(2 * m, 0.0, np.pi)
        else:
            phi = (np.arange(2 * m) + 0.5) * np.pi / m
            w = np.full(2 * m, np.pi / m)
        return np.column_stack([np.cos(phi), np.sin(phi)]), w
    sub, wsub = _sphere_rule(n - 1, m, False)
    hi = 0.5 * np.pi if upper_only else np.pi
    polar, wp = gauss_legendre(m, 0.0, hi)
    wp = wp * np.sin(polar) ** (n - 2)
    s, c = np.sin(polar), np.cos(polar)
    # last coordinate is cos(polar); the remaining ones scale the (n-1)-sphere
    pts = np.concatenate(
        [s[:, None, None] * sub[None, :, :], np.broadcast_to(c[:, None, None], (m, len(sub), 1))],
        axis=2,
    ).reshape(-1, n)
    wts = (wp[:, None] * wsub[None, :]).reshape(-1)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def sphere_rule(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{n-1}: Gauss-Legendre in each polar angle, trapezoid in azimuth.

    Returns ``(directions, weights)``; the weights sum to the sphere area.
    """
    if n < 2:
        raise ValueError(f"sphere rule needs n >= 2, got {n}")
    return _sphere_rule(n, m, False)


def hemisphere_rule(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on the half sphere ``{theta in S^{n-1} : theta_n > 0}``."""
    if n < 2:
        raise ValueError(f"sphere rule needs n >= 2, got {n}")
    return _sphere_rule(n, m, True)
