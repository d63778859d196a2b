"""Closed-form Green kernels built by the method of images, and Green potentials.

All kernels are for the Laplacian (``A = I``, no drift, ``c = 0``) with
Neumann data on flat Robin pieces; other operators go through the discrete
solve in :mod:`hardyforge.discrete`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import beta as _beta

from .domain import DomainSpec, OperatorSpec, as_points
from .quadrature import gauss_legendre, sphere_rule, unit_sphere_area


class SingularityError(ValueError):
    """A kernel was evaluated on its diagonal ``x = y``."""


class KernelUnavailableError(ValueError):
    """No closed-form kernel ships for this domain/boundary data."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature stopped before reaching the requested tolerance."""

    def __init__(self, message: str, estimate: float, achieved: float):
        super().__init__(f"{message} (estimate {estimate:.17g}, achieved rel. change {achieved:.3g})")
        self.estimate = estimate
        self.achieved = achieved


def reflect(x) -> np.ndarray:
    """Mirror image across ``x_n = 0``: ``(x', x_n) -> (x', -x_n)``."""
    arr = np.array(x, dtype=float)
    arr[..., -1] *= -1.0
    return arr


def newton_constant(n: int) -> float:
    """``c_n = 1 / ((n - 2) |S^{n-1}|)`` so that ``-Laplace(c_n |x|^{2-n}) = delta``."""
    if n < 3:
        raise ValueError(f"Green kernels are shipped for n >= 3 only, got n={n}")
    return 1.0 / ((n - 2) * unit_sphere_area(n))


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return np.broadcast_arrays(x, y)


def _check_distinct(d2: np.ndarray) -> None:
    if np.any(d2 <= 0.0):
        raise SingularityError("kernel evaluated on the diagonal x = y")


def green_free(n: int, x, y) -> np.ndarray:
    """Fundamental solution ``c_n |x - y|^{2-n}`` (rows of ``x`` and ``y`` broadcast)."""
    x, y = _pair(x, y)
    d2 = np.sum((x - y) ** 2, axis=1)
    _check_distinct(d2)
    return newton_constant(n) * d2 ** (1.0 - 0.5 * n)


def green_free_grad(n: int, x, y) -> np.ndarray:
    """x-gradient of :func:`green_free`: ``-(n-2) c_n |d|^{-n} d`` with ``d = x - y``."""
    x, y = _pair(x, y)
    d = x - y
    d2 = np.sum(d**2, axis=1)
    _check_distinct(d2)
    return -(n - 2) * newton_constant(n) * d2[:, None] ** (-0.5 * n) * d


def _kelvin_q(x: np.ndarray, y: np.ndarray, radius: float) -> np.ndarray:
    # |x| |y - y*| / ... written symmetrically; equals |x - y| when |x| = radius
    R2 = radius * radius
    xx = np.sum(x * x, axis=1)
    yy = np.sum(y * y, axis=1)
    xy = np.sum(x * y, axis=1)
    return np.sqrt(np.maximum(xx * yy / R2 - 2.0 * xy + R2, 0.0))


def _kelvin_term(n: int, x, y, radius: float) -> np.ndarray:
    x, y = _pair(x, y)
    return newton_constant(n) * _kelvin_q(x, y, radius) ** (2.0 - n)


def _kelvin_term_grad(n: int, x, y, radius: float) -> np.ndarray:
    x, y = _pair(x, y)
    R2 = radius * radius
    q = _kelvin_q(x, y, radius)
    yy = np.sum(y * y, axis=1)
    dq = (yy[:, None] * x - R2 * y) / (R2 * q[:, None])
    return newton_constant(n) * (2.0 - n) * q[:, None] ** (1.0 - n) * dq


def green_dirichlet_ball(n: int, radius: float, x, y) -> np.ndarray:
    """Dirichlet Green function of the ball ``|x| < radius`` (Kelvin image).

    The image term is evaluated in the symmetric form
    ``c_n (|x|^2|y|^2/R^2 - 2 x.y + R^2)^{(2-n)/2}``, which is regular at ``y = 0``.
    """
    return green_free(n, x, y) - _kelvin_term(n, x, y, radius)


def green_dirichlet_ball_grad(n: int, radius: float, x, y) -> np.ndarray:
    return green_free_grad(n, x, y) - _kelvin_term_grad(n, x, y, radius)


# --------------------------------------------------------------------------- kernels


@dataclass(frozen=True)
class GreenKernel:
    """Positive minimal Green function ``G(x, y)`` of the Laplacian on a model domain.

    The kernel splits as ``c_n |x - y|^{2-n} + H(x, y)`` where the regular part
    ``H(x, .)`` is harmonic on the domain; :meth:`regular` exposes ``H``.
    """

    domain: DomainSpec

    @property
    def n(self) -> int:
        return self.domain.n

    def regular(self, x, y) -> np.ndarray:
        x, y = _pair(x, y)
        n, kind = self.n, self.domain.kind
        if kind == "punctured_space":
            return np.zeros(len(x))
        if kind == "half_space":
            return green_free(n, reflect(x), y)
        R = self.domain.radius
        return -_kelvin_term(n, x, y, R) + green_dirichlet_ball(n, R, reflect(x), y)

    def regular_grad_x(self, x, y) -> np.ndarray:
        x, y = _pair(x, y)
        n, kind = self.n, self.domain.kind
        if kind == "punctured_space":
            return np.zeros_like(x)
        if kind == "half_space":
            return reflect(green_free_grad(n, reflect(x), y))
        R = self.domain.radius
        return -_kelvin_term_grad(n, x, y, R) + reflect(green_dirichlet_ball_grad(n, R, reflect(x), y))

    def __call__(self, x, y) -> np.ndarray:
        return green_free(self.n, x, y) + self.regular(x, y)

    def grad_x(self, x, y) -> np.ndarray:
        return green_free_grad(self.n, x, y) + self.regular_grad_x(x, y)


def images_kernel(domain: DomainSpec, operator: Optional[OperatorSpec] = None) -> GreenKernel:
    """Images kernel for the half ball, the half space (Neumann flat part) or punctured space."""
    if domain.n < 3:
        raise KernelUnavailableError("Green kernels are shipped for n >= 3 only")
    if domain.kind not in ("half_ball", "half_space", "punctured_space"):
        raise KernelUnavailableError(
            f"no closed-form kernel for {domain.kind!r}; use discrete.discrete_green on a grid instead"
        )
    if operator is not None:
        gamma = operator.gamma_value
        if not operator.is_laplacian or (operator.gamma is not None and gamma != 0.0):
            raise KernelUnavailableError(
                "images kernels need the Laplacian with Neumann data (gamma = 0); "
                "use discrete.discrete_green for other boundary data"
            )
    return GreenKernel(domain)


def green_mixed(domain: DomainSpec, x, y, operator: Optional[OperatorSpec] = None) -> np.ndarray:
    """Evaluate the images sum of the mixed problem on ``domain``."""
    return images_kernel(domain, operator)(x, y)


# --------------------------------------------------------------------------- densities


@dataclass(frozen=True)
class Density:
    """Radial bump ``K (1 - |y - center|^2 / radius^2)^3`` clamped at zero, total mass ``mass``."""

    center: tuple
    radius: float
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in np.ravel(self.center)))
        if not self.radius > 0:
            raise ValueError(f"density radius must be positive, got {self.radius}")
        if not self.mass > 0:
            raise ValueError(f"density mass must be positive, got {self.mass}")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center)

    @property
    def peak(self) -> float:
        """The constant ``K``: ``mass / (|S^{n-1}| radius^n B(n/2, 4) / 2)``."""
        n = self.n
        integral = 0.5 * _beta(0.5 * n, 4.0)
        return self.mass / (unit_sphere_area(n) * self.radius**n * integral)

    def scaled(self, factor: float) -> "Density":
        return Density(self.center, self.radius, self.mass * factor)

    def __call__(self, y) -> np.ndarray:
        y = as_points(y, self.n)
        s2 = np.sum((y - self.c) ** 2, axis=1) / self.radius**2
        return self.peak * np.clip(1.0 - s2, 0.0, None) ** 3

    def gradient(self, y) -> np.ndarray:
        y = as_points(y, self.n)
        d = y - self.c
        s2 = np.sum(d**2, axis=1) / self.radius**2
        g = np.clip(1.0 - s2, 0.0, None) ** 2
        return (-6.0 * self.peak / self.radius**2) * g[:, None] * d

    def in_support(self, x) -> np.ndarray:
        x = as_points(x, self.n)
        return np.sum((x - self.c) ** 2, axis=1) < self.radius**2

    def fits_inside(self, domain: DomainSpec, margin: float = 0.0) -> bool:
        """Support is a closed ball at positive distance from the whole boundary.

        The puncture of ``punctured_space`` is polar for ``n >= 3`` and does not count.
        """
        if domain.kind == "punctured_space":
            return domain.n == self.n
        if domain.n != self.n or not bool(domain.contains(self.c)[0]):
            return False
        return bool(domain.distance_to_boundary(self.c)[0] > self.radius + margin)

    # the free-space potential of the bump in closed form ------------------
    def _J(self, sigma: np.ndarray) -> np.ndarray:
        # int_0^sigma (1 - s^2)^3 s^{n-1} ds divided by sigma^n
        n = self.n
        s2 = sigma * sigma
        return 1.0 / n - 3.0 * s2 / (n + 2) + 3.0 * s2**2 / (n + 4) - s2**3 / (n + 6)

    def newton_potential(self, r) -> np.ndarray:
        """``int c_n |x - y|^{2-n} phi(y) dy`` as a function of ``r = |x - center|``."""
        n = self.n
        r = np.asarray(r, dtype=float)
        rho = self.radius
        sigma = np.minimum(r / rho, 1.0)
        inside = self.peak * rho**2 / (n - 2) * (sigma**2 * self._J(sigma) + (1.0 - sigma**2) ** 4 / 8.0)
        with np.errstate(divide="ignore"):
            outside = self.mass * newton_constant(n) * r ** (2.0 - n)
        return np.where(r < rho, inside, outside)

    def newton_potential_derivative(self, r) -> np.ndarray:
        """Radial derivative of :meth:`newton_potential`."""
        n = self.n
        r = np.asarray(r, dtype=float)
        rho = self.radius
        sigma = np.minimum(r / rho, 1.0)
        inside = -self.peak * rho * sigma * self._J(sigma)
        with np.errstate(divide="ignore"):
            outside = -(n - 2) * self.mass * newton_constant(n) * r ** (1.0 - n)
        return np.where(r < rho, inside, outside)


def canonical_density(domain: DomainSpec) -> Density:
    """The bump used by the example pipelines for each kernel-bearing domain."""
    n = domain.n
    if domain.kind == "punctured_space":
        return Density(np.zeros(n), 1.0)
    if domain.kind == "half_space":
        c = np.zeros(n)
        c[-1] = 2.0
        return Density(c, 1.0)
    if domain.kind == "half_ball":
        c = np.zeros(n)
        c[-1] = 0.5 * domain.radius
        return Density(c, 0.25 * domain.radius)
    raise KernelUnavailableError(f"no canonical density for {domain.kind!r}")


# --------------------------------------------------------------------------- potentials


def _shell_edges(levels: int) -> np.ndarray:
    return np.concatenate([[0.0], 2.0 ** -np.arange(levels - 1, -1, -1)])


class GreenPotential:
    """``G_phi(x) = int G(x, y) phi(y) dy`` for a radial bump ``phi``.

    ``method="shell"`` uses the shell theorem: the regular part of the kernel
    is harmonic in ``y`` on the support, so its average against the radial
    bump is its value at the centre, and the singular part has the closed
    form :meth:`Density.newton_potential`.  ``method="quadrature"`` integrates
    directly in polar coordinates and serves as an independent check.
    """

    def __init__(self, kernel: GreenKernel, density: Density, method: str = "shell", rtol: float = 1e-8):
        if density.n != kernel.n:
            raise ValueError("kernel and density dimensions differ")
        if not density.fits_inside(kernel.domain):
            raise ValueError("density support must lie compactly inside the domain")
        if method not in ("shell", "quadrature"):
            raise ValueError(f"unknown potential method {method!r}")
        self.kernel = kernel
        self.density = density
        self.method = method
        self.rtol = rtol
        self.label = f"G_phi[{kernel.domain.kind}]"

    @property
    def n(self) -> int:
        return self.kernel.n

    def scaled(self, factor: float) -> "GreenPotential":
        return GreenPotential(self.kernel, self.density.scaled(factor), self.method, self.rtol)

    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.n)
        if self.method == "quadrature":
            return np.array([quadrature_potential(self.kernel, self.density, p, self.rtol)[0] for p in x])
        c = self.density.c
        r = np.linalg.norm(x - c, axis=1)
        return self.density.newton_potential(r) + self.density.mass * self.kernel.regular(x, c)

    def grad(self, x) -> np.ndarray:
        x = as_points(x, self.n)
        if self.method == "quadrature":
            return np.array([quadrature_potential(self.kernel, self.density, p, self.rtol)[1] for p in x])
        c = self.density.c
        d = x - c
        r = np.linalg.norm(d, axis=1)
        dN = self.density.newton_potential_derivative(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(r[:, None] > 0, dN[:, None] * d / r[:, None], 0.0)
        return radial + self.density.mass * self.kernel.regular_grad_x(x, c)

    def laplacian(self, x) -> np.ndarray:
        """``P G_phi = phi`` for the Laplacian."""
        return self.density(x)


def _polar_nodes(x: np.ndarray, density: Density, m: int, levels: int):
    """Nodes ``y`` and weights for ``int_supp f(y) dy``, polar about ``x`` or the centre."""
    n = density.n
    c, rho = density.c, density.radius
    dirs, wd = sphere_rule(n, m)
    edges = _shell_edges(levels)
    d = x - c
    if d @ d < rho * rho:
        # polar about x: exit distance along each direction
        p = dirs @ d
        s_out = -p + np.sqrt(p * p + rho * rho - d @ d)
        origin = x
    else:
        s_out = np.full(len(dirs), rho)
        origin = c
    ts, wt = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t, w = gauss_legendre(m, a, b)
        ts.append(t)
        wt.append(w)
    t = np.concatenate(ts)
    wt = np.concatenate(wt)
    s = s_out[:, None] * t[None, :]
    w = wd[:, None] * wt[None, :] * s_out[:, None] * s ** (n - 1)
    y = origin + (s[..., None] * dirs[:, None, :])
    return y.reshape(-1, n), w.reshape(-1), s.reshape(-1)


def quadrature_potential(
    kernel: GreenKernel, density: Density, x, rtol: float = 1e-8, max_level: int = 6
) -> tuple[float, np.ndarray]:
    """``(G_phi(x), grad G_phi(x))`` by tensor Gauss-Legendre on dyadic shells.

    The shells are polar about ``x`` when ``x`` lies in the support, where the
    Jacobian ``s^{n-1}`` cancels the kernel singularity, and about the centre
    otherwise.  Rules are doubled until value and gradient change by less than
    ``rtol``; otherwise :class:`QuadratureError` is raised.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    prev: Optional[tuple[float, np.ndarray]] = None
    change = np.inf
    for level in range(max_level):
        m = 6 * 2 ** (level // 2) + (3 if level % 2 else 0)
        y, w, s = _polar_nodes(x, density, m, 3 + level)
        keep = s > 0
        y, w = y[keep], w[keep]
        phi = density(y)
        xs = np.broadcast_to(x, y.shape)
        val = float(np.sum(w * phi * kernel(xs, y)))
        grad = np.sum((w * phi)[:, None] * kernel.grad_x(xs, y), axis=0)
        if prev is not None:
            gscale = max(float(np.linalg.norm(grad)), abs(val) / density.radius, 1e-300)
            change = max(
                abs(val - prev[0]) / max(abs(val), 1e-300),
                float(np.linalg.norm(grad - prev[1])) / gscale,
            )
            if change <= rtol:
                return val, grad
        prev = (val, grad)
    raise QuadratureError("Green potential quadrature did not converge", prev[0], change)


def green_potential(kernel: GreenKernel, density: Density, x, rtol: float = 1e-8) -> np.ndarray:
    """``G_phi`` at the rows of ``x`` by direct quadrature."""
    return GreenPotential(kernel, density, "quadrature", rtol)(x)


def green_potential_grad(kernel: GreenKernel, density: Density, x, rtol: float = 1e-8) -> np.ndarray:
    return GreenPotential(kernel, density, "quadrature", rtol).grad(x)


def surface_flux(grad_field: Callable[[np.ndarray], np.ndarray], center, radius: float, n: int, m: int = 24) -> float:
    """Outward flux of ``-grad_field`` through the sphere ``|x - center| = radius``."""
    dirs, w = sphere_rule(n, m)
    pts = np.asarray(center, dtype=float) + radius * dirs
    g = grad_field(pts)
    return float(-np.sum(w * radius ** (n - 1) * np.einsum("mi,mi->m", g, dirs)))
