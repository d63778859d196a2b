"""Model domains, mixed boundary decompositions, exhaustions, operators and scalar fields.

Points are always handled as arrays of shape ``(m, n)``; a single point may be
passed as a length-``n`` sequence and is promoted to ``(1, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import expr
from .quadrature import gauss_legendre, hemisphere_rule, sphere_rule

KINDS = ("half_ball", "half_space", "exterior_ball", "punctured_space", "box")
POLICIES = ("canonical", "dirichlet")


def as_points(x, n: Optional[int] = None) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if n is not None and pts.shape[1] != n:
        raise ValueError(f"expected points with {n} coordinates, got shape {pts.shape}")
    return pts


def _norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=1)


def _random_directions(rng: np.random.Generator, m: int, n: int, upper: bool = False) -> np.ndarray:
    d = rng.standard_normal((m, n))
    d /= _norm(d)[:, None]
    if upper:
        d[:, -1] = np.abs(d[:, -1])
    return d


# --------------------------------------------------------------------------- domains


@dataclass(frozen=True)
class DomainSpec:
    """One of the model geometries.

    ``half_ball`` and ``exterior_ball`` use ``radius``; ``box`` uses
    ``lower``/``upper`` corners.  The exterior ball is ``|x| > radius`` and
    the half ball is ``{|x| < radius, x_n > 0}``.
    """

    kind: str
    n: int
    radius: float = 1.0
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.n}")
        if self.kind in ("half_ball", "exterior_ball") and not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ValueError("box domains need lower and upper corners")
            lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if lo.shape != (self.n,) or hi.shape != (self.n,) or np.any(hi <= lo):
                raise ValueError(f"invalid box corners {self.lower}, {self.upper}")
            object.__setattr__(self, "lower", tuple(float(v) for v in lo))
            object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    # constructors ---------------------------------------------------------
    @classmethod
    def half_ball(cls, n: int, radius: float = 1.0) -> "DomainSpec":
        return cls("half_ball", n, radius)

    @classmethod
    def half_space(cls, n: int) -> "DomainSpec":
        return cls("half_space", n)

    @classmethod
    def exterior_ball(cls, n: int, radius: float = 1.0) -> "DomainSpec":
        return cls("exterior_ball", n, radius)

    @classmethod
    def punctured_space(cls, n: int) -> "DomainSpec":
        return cls("punctured_space", n)

    @classmethod
    def box(cls, lower, upper) -> "DomainSpec":
        return cls("box", len(lower), lower=tuple(lower), upper=tuple(upper))

    @property
    def bounded(self) -> bool:
        return self.kind in ("half_ball", "box")

    @property
    def radial(self) -> bool:
        """True when the geometry is invariant under rotations about the origin."""
        return self.kind in ("exterior_ball", "punctured_space")

    def contains(self, x) -> np.ndarray:
        """Membership in the open domain."""
        x = as_points(x, self.n)
        r = _norm(x)
        if self.kind == "half_ball":
            return (r < self.radius) & (x[:, -1] > 0)
        if self.kind == "half_space":
            return x[:, -1] > 0
        if self.kind == "exterior_ball":
            return r > self.radius
        if self.kind == "punctured_space":
            return r > 0
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((x > lo) & (x < hi), axis=1)

    def distance_to_boundary(self, x) -> np.ndarray:
        x = as_points(x, self.n)
        r = _norm(x)
        if self.kind == "half_ball":
            return np.minimum(self.radius - r, x[:, -1])
        if self.kind == "half_space":
            return x[:, -1].copy()
        if self.kind == "exterior_ball":
            return r - self.radius
        if self.kind == "punctured_space":
            return r
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return np.min(np.minimum(x - lo, hi - x), axis=1)


# --------------------------------------------------------------------------- boundary portions


@dataclass(frozen=True)
class BoundaryPortion:
    """A piece of the boundary: membership predicate, outward normal, sampler and surface rule.

    ``shape`` is one of

    * ``"empty"``
    * ``"disc"``: the part of ``x_n = level`` with ``|x'| < radius`` (``<=`` when
      ``closed``); ``radius=inf`` is the whole hyperplane
    * ``"sphere"``: ``|x| = radius``, restricted to ``x_n >= 0`` when ``upper_only``
    * ``"box_bottom"``: the open face ``x_n = lo_n`` of ``box``
    * ``"box_faces"``: the boundary of ``box``, without the open bottom face when
      ``exclude_bottom``
    * ``"union"``: the union of ``parts``
    """

    label: str
    shape: str
    n: int
    radius: float = np.inf
    level: float = 0.0
    upper_only: bool = False
    closed: bool = False
    outward: int = -1
    box: Optional[tuple] = None
    exclude_bottom: bool = False
    parts: tuple = ()

    @property
    def empty(self) -> bool:
        return self.shape == "empty"

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        x = as_points(x, self.n)
        shape = self.shape
        if shape == "empty":
            return np.zeros(len(x), dtype=bool)
        if shape == "disc":
            on = np.abs(x[:, -1] - self.level) <= tol
            rho = _norm(x[:, :-1])
            return on & ((rho <= self.radius + tol) if self.closed else (rho < self.radius - tol))
        if shape == "sphere":
            on = np.abs(_norm(x) - self.radius) <= tol
            return on & (x[:, -1] >= -tol) if self.upper_only else on
        if shape == "union":
            out = np.zeros(len(x), dtype=bool)
            for p in self.parts:
                out |= p.contains(x, tol)
            return out
        lo, hi = (np.asarray(c) for c in self.box)
        bottom_open = (np.abs(x[:, -1] - lo[-1]) <= tol) & np.all(
            (x[:, :-1] > lo[:-1] + tol) & (x[:, :-1] < hi[:-1] - tol), axis=1
        )
        if shape == "box_bottom":
            return bottom_open
        inside = np.all((x >= lo - tol) & (x <= hi + tol), axis=1)
        on_face = np.any((np.abs(x - lo) <= tol) | (np.abs(x - hi) <= tol), axis=1)
        result = inside & on_face
        return result & ~bottom_open if self.exclude_bottom else result

    def distance(self, x) -> np.ndarray:
        """Euclidean distance from points of the closed domain to this portion (inf if empty)."""
        x = as_points(x, self.n)
        shape = self.shape
        if shape == "empty":
            return np.full(len(x), np.inf)
        if shape == "disc":
            rho = _norm(x[:, :-1])
            dz = x[:, -1] - self.level
            outside = np.maximum(rho - self.radius, 0.0) if np.isfinite(self.radius) else 0.0
            return np.hypot(outside, dz)
        if shape == "sphere":
            d = np.abs(_norm(x) - self.radius)
            if self.upper_only:
                rim = np.hypot(_norm(x[:, :-1]) - self.radius, x[:, -1])
                d = np.where(x[:, -1] >= 0, d, rim)
            return d
        if shape == "union":
            return np.min([p.distance(x) for p in self.parts], axis=0)
        lo, hi = (np.asarray(c) for c in self.box)
        gaps = np.concatenate([x - lo, hi - x], axis=1)
        if shape == "box_bottom":
            return np.abs(x[:, -1] - lo[-1])
        if self.exclude_bottom:
            gaps = np.delete(gaps, self.n - 1, axis=1)
        return np.min(np.abs(gaps), axis=1)

    def normal(self, x) -> np.ndarray:
        """Outward unit normal of the domain at points of this portion."""
        x = as_points(x, self.n)
        if self.shape in ("disc", "box_bottom"):
            nrm = np.zeros_like(x)
            nrm[:, -1] = self.outward
            return nrm
        if self.shape == "sphere":
            return self.outward * x / _norm(x)[:, None]
        raise ValueError(f"no normal field for portion shape {self.shape!r}")

    def sample(self, rng: np.random.Generator, m: int, extent: float = 10.0) -> np.ndarray:
        """Random points on the portion; unbounded pieces are cut at radius ``extent``."""
        n = self.n
        shape = self.shape
        if shape == "empty":
            return np.empty((0, n))
        if shape == "disc":
            rad = min(self.radius, extent)
            d = _random_directions(rng, m, n - 1)
            rr = rad * rng.uniform(0.0, 1.0, m) ** (1.0 / (n - 1)) * (1 - 1e-9)
            pts = np.zeros((m, n))
            pts[:, :-1] = d * rr[:, None]
            pts[:, -1] = self.level
            return pts
        if shape == "sphere":
            return self.radius * _random_directions(rng, m, n, upper=self.upper_only)
        if shape == "union":
            counts = np.diff(np.linspace(0, m, len(self.parts) + 1).astype(int))
            return np.vstack([p.sample(rng, c, extent) for p, c in zip(self.parts, counts)])
        lo, hi = (np.asarray(c) for c in self.box)
        pts = rng.uniform(lo, hi, (m, n))
        if shape == "box_bottom":
            pts[:, -1] = lo[-1]
            return pts
        axis = rng.integers(0, n, m)
        side = rng.integers(0, 2, m)
        if self.exclude_bottom:
            side[axis == n - 1] = 1
        pts[np.arange(m), axis] = np.where(side == 0, lo[axis], hi[axis])
        return pts

    def quadrature(self, m: int = 16) -> tuple[np.ndarray, np.ndarray]:
        """Surface-measure rule ``(points, weights)`` for bounded disc and sphere pieces."""
        n = self.n
        if self.shape == "empty":
            return np.empty((0, n)), np.empty(0)
        if self.shape == "sphere":
            dirs, w = hemisphere_rule(n, m) if self.upper_only else sphere_rule(n, m)
            return self.radius * dirs, w * self.radius ** (n - 1)
        if self.shape == "disc" and np.isfinite(self.radius):
            rr, wr = gauss_legendre(m, 0.0, self.radius)
            if n == 2:
                pts = np.concatenate([rr, -rr])[:, None]
                w = np.concatenate([wr, wr])
            else:
                dirs, wd = sphere_rule(n - 1, m)
                pts = (rr[:, None, None] * dirs[None]).reshape(-1, n - 1)
                w = (wr[:, None] * rr[:, None] ** (n - 2) * wd[None]).reshape(-1)
            out = np.zeros((len(pts), n))
            out[:, :-1] = pts
            out[:, -1] = self.level
            return out, w
        raise ValueError(f"no surface rule for portion {self.label!r}")


def _empty(label: str, n: int) -> BoundaryPortion:
    return BoundaryPortion(label, "empty", n)


@dataclass(frozen=True)
class BoundaryDecomposition:
    robin: BoundaryPortion
    dirichlet: BoundaryPortion

    def classify(self, x, tol: float = 1e-9) -> np.ndarray:
        """Label boundary samples: 0 Robin, 1 Dirichlet, -1 neither, 2 both."""
        r = self.robin.contains(x, tol)
        d = self.dirichlet.contains(x, tol)
        return np.where(r & d, 2, np.where(r, 0, np.where(d, 1, -1)))


def decompose_boundary(domain: DomainSpec, policy: str = "canonical") -> BoundaryDecomposition:
    """Split the boundary of a model domain into its Robin and Dirichlet portions.

    ``policy="canonical"`` gives the Robin piece used throughout (flat part of
    the half domains, the sphere of the exterior ball, the bottom face of a
    box); ``policy="dirichlet"`` makes the whole boundary Dirichlet.  The
    puncture of ``punctured_space`` is a polar set and belongs to neither
    portion.
    """
    n = domain.n
    if policy not in POLICIES:
        raise ValueError(f"unknown boundary policy {policy!r}; expected one of {POLICIES}")
    kind = domain.kind
    if kind == "punctured_space":
        if policy != "canonical":
            raise ValueError(
                "punctured_space supports only policy='canonical': the puncture is a polar set "
                "and cannot carry a Dirichlet condition"
            )
        return BoundaryDecomposition(_empty("robin", n), _empty("dirichlet", n))
    if kind == "half_ball":
        disc = BoundaryPortion("flat disc", "disc", n, radius=domain.radius, outward=-1)
        cap = BoundaryPortion("spherical cap", "sphere", n, radius=domain.radius, upper_only=True, outward=1)
        if policy == "canonical":
            return BoundaryDecomposition(disc, cap)
        closed_disc = BoundaryPortion("flat disc", "disc", n, radius=domain.radius, closed=True)
        return BoundaryDecomposition(
            _empty("robin", n), BoundaryPortion("whole boundary", "union", n, parts=(closed_disc, cap))
        )
    if kind == "half_space":
        plane = BoundaryPortion("plane x_n = 0", "disc", n, outward=-1)
        if policy == "canonical":
            return BoundaryDecomposition(plane, _empty("dirichlet", n))
        return BoundaryDecomposition(_empty("robin", n), plane)
    if kind == "exterior_ball":
        sphere = BoundaryPortion("unit sphere", "sphere", n, radius=domain.radius, outward=-1)
        if policy == "canonical":
            return BoundaryDecomposition(sphere, _empty("dirichlet", n))
        return BoundaryDecomposition(_empty("robin", n), sphere)
    box = (domain.lower, domain.upper)
    if policy == "canonical":
        return BoundaryDecomposition(
            BoundaryPortion("bottom face", "box_bottom", n, box=box, level=box[0][-1]),
            BoundaryPortion("other faces", "box_faces", n, box=box, exclude_bottom=True),
        )
    return BoundaryDecomposition(_empty("robin", n), BoundaryPortion("all faces", "box_faces", n, box=box))


# --------------------------------------------------------------------------- exhaustions


def exhaustion_radius(domain: DomainSpec, k: int) -> float:
    """Radius schedule ``R_k`` (an offset fraction for boxes)."""
    if domain.kind == "exterior_ball":
        return domain.radius * 2.0**k
    if domain.kind in ("half_space", "punctured_space"):
        return 2.0**k
    if domain.kind == "half_ball":
        return domain.radius * (1.0 - 2.0 ** (-(k + 1)))
    return 2.0 ** (-(k + 1))


@dataclass(frozen=True)
class TruncatedDomain:
    """Member ``Omega_k`` of the canonical exhaustion with its own Robin/Dirichlet split."""

    domain: DomainSpec
    k: int
    inner: float
    outer: float
    robin: BoundaryPortion
    dirichlet: BoundaryPortion
    box: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.domain.n

    def contains(self, x) -> np.ndarray:
        x = as_points(x, self.n)
        if self.box is not None:
            lo, hi = (np.asarray(c) for c in self.box)
            return np.all((x > lo) & (x < hi), axis=1)
        r = _norm(x)
        ok = self.domain.contains(x) & (r < self.outer) & (r > self.inner)
        return ok

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        if self.box is not None:
            return np.asarray(self.box[0]), np.asarray(self.box[1])
        lo = np.full(n, -self.outer)
        if self.domain.kind in ("half_ball", "half_space"):
            lo[-1] = 0.0
        return lo, np.full(n, self.outer)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Uniform random points of ``Omega_k`` (rejection sampling)."""
        lo, hi = self.bounding_box()
        out = []
        count = 0
        while count < m:
            pts = rng.uniform(lo, hi, (4 * m + 16, self.n))
            pts = pts[self.contains(pts)]
            out.append(pts)
            count += len(pts)
        return np.vstack(out)[:m]

    def sample_complement(self, rng: np.random.Generator, m: int, spread: float = 1e3) -> np.ndarray:
        """Random points of ``Omega \\ Omega_k``.

        Unbounded directions are cut at ``spread`` times the truncation radius;
        radii are log-uniform and a quarter of the points sit on the inner edge
        of the complement, where slowly decaying ratios attain their maximum.
        """
        n = self.n
        kind = self.domain.kind
        if kind in ("exterior_ball", "punctured_space", "half_space"):
            upper = kind == "half_space"
            r = self.outer * np.exp(rng.uniform(0.0, np.log(spread), m))
            r[: m // 4] = self.outer * (1 + 1e-9)
            d = _random_directions(rng, m, n, upper=upper)
            if upper:
                d[:, -1] = np.maximum(d[:, -1], 1e-6)
                d /= _norm(d)[:, None]
            return r[:, None] * d
        if kind == "half_ball":
            R = self.domain.radius
            gap = R - self.outer
            dist = gap * np.exp(rng.uniform(np.log(1e-6), 0.0, m))
            dist[: m // 4] = gap * (1 - 1e-9)
            d = _random_directions(rng, m, n, upper=True)
            d[:, -1] = np.maximum(d[:, -1], 1e-3)
            d /= _norm(d)[:, None]
            return (R - dist)[:, None] * d
        lo, hi = np.asarray(self.domain.lower), np.asarray(self.domain.upper)
        out = []
        count = 0
        while count < m:
            pts = rng.uniform(lo, hi, (4 * m + 16, n))
            pts = pts[~self.contains(pts)]
            out.append(pts)
            count += len(pts)
        return np.vstack(out)[:m]


def exhaustion_member(domain: DomainSpec, k: int) -> TruncatedDomain:
    """The k-th member of the canonical exhaustion of ``Omega-bar minus the Dirichlet part``.

    * exterior ball: annulus ``radius < |x| < radius 2^k``; Robin inner sphere, Dirichlet outer sphere
    * half space: ``{|x| < 2^k, x_n > 0}``; Robin flat disc, Dirichlet hemisphere
    * half ball: ``{|x| < radius (1 - 2^-(k+1)), x_n > 0}``; Robin flat disc, Dirichlet cap
    * punctured space: ball ``|x| < 2^k`` (the puncture is polar); Dirichlet sphere
    * box: the Dirichlet faces pulled inward by ``2^-(k+1)`` of each width; Robin bottom face
    """
    if int(k) != k or k < 1:
        raise ValueError(f"exhaustion index must be an integer >= 1, got {k}")
    n = domain.n
    kind = domain.kind
    R = exhaustion_radius(domain, k)
    if kind == "exterior_ball":
        return TruncatedDomain(
            domain, k, domain.radius, R,
            BoundaryPortion("inner sphere", "sphere", n, radius=domain.radius, outward=-1),
            BoundaryPortion("outer sphere", "sphere", n, radius=R, outward=1),
        )
    if kind in ("half_space", "half_ball"):
        return TruncatedDomain(
            domain, k, 0.0, R,
            BoundaryPortion("flat disc", "disc", n, radius=R, outward=-1),
            BoundaryPortion("hemisphere", "sphere", n, radius=R, upper_only=True, outward=1),
        )
    if kind == "punctured_space":
        return TruncatedDomain(
            domain, k, 0.0, R, _empty("robin", n),
            BoundaryPortion("outer sphere", "sphere", n, radius=R, outward=1),
        )
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    delta = R * (hi - lo)
    new_lo = lo + delta
    new_lo[-1] = lo[-1]
    new_hi = hi - delta
    box = (tuple(new_lo), tuple(new_hi))
    return TruncatedDomain(
        domain, k, 0.0, np.inf,
        BoundaryPortion("bottom face", "box_bottom", n, box=box, level=lo[-1]),
        BoundaryPortion("other faces", "box_faces", n, box=box, exclude_bottom=True),
        box=box,
    )


# --------------------------------------------------------------------------- operators


Coefficient = Optional[Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class OperatorSpec:
    """Coefficients of ``Pu = -div(A grad u + u b_tilde) + b . grad u + c u`` and of the
    Robin operator ``Bu = beta (A grad u + u b_tilde) . n + gamma u``.

    Every coefficient is a vectorized callable on ``(m, n)`` point arrays
    (``A`` returns ``(m, n, n)``, the drifts ``(m, n)``, scalars ``(m,)``);
    ``None`` means identity for ``A``, one for ``beta`` and zero otherwise.
    ``gamma_value`` records a constant Robin coefficient when there is one.
    """

    n: int
    A: Coefficient = None
    b_tilde: Coefficient = None
    b: Coefficient = None
    c: Coefficient = None
    beta: Coefficient = None
    gamma: Coefficient = None
    symmetric: bool = True
    theta: float = 1.0
    label: str = "custom"
    gamma_value: Optional[float] = None

    @property
    def is_laplacian(self) -> bool:
        return all(f is None for f in (self.A, self.b_tilde, self.b, self.c))

    def A_at(self, x) -> np.ndarray:
        x = as_points(x, self.n)
        if self.A is None:
            return np.broadcast_to(np.eye(self.n), (len(x), self.n, self.n))
        return np.asarray(self.A(x), dtype=float).reshape(len(x), self.n, self.n)

    def _vector(self, f, x) -> np.ndarray:
        x = as_points(x, self.n)
        if f is None:
            return np.zeros((len(x), self.n))
        return np.asarray(f(x), dtype=float).reshape(len(x), self.n)

    def _scalar(self, f, x, default: float) -> np.ndarray:
        x = as_points(x, self.n)
        if f is None:
            return np.full(len(x), default)
        return np.broadcast_to(np.asarray(f(x), dtype=float), (len(x),)).copy()

    def b_tilde_at(self, x) -> np.ndarray:
        return self._vector(self.b_tilde, x)

    def b_at(self, x) -> np.ndarray:
        return self._vector(self.b, x)

    def c_at(self, x) -> np.ndarray:
        return self._scalar(self.c, x, 0.0)

    def beta_at(self, x) -> np.ndarray:
        return self._scalar(self.beta, x, 1.0)

    def gamma_at(self, x) -> np.ndarray:
        return self._scalar(self.gamma, x, 0.0)

    def norm_A_sq(self, x, xi) -> np.ndarray:
        """``|xi|_A^2 = A(x) xi . xi`` row by row."""
        xi = as_points(xi, self.n)
        if self.A is None:
            return np.einsum("mi,mi->m", xi, xi)
        return np.einsum("mi,mij,mj->m", xi, self.A_at(x), xi)

    def check_symmetric_flag(self, x, tol: float = 1e-12) -> bool:
        """If flagged symmetric, ``b`` and ``b_tilde`` must agree at the probe points."""
        if not self.symmetric:
            return True
        return bool(np.all(np.abs(self.b_at(x) - self.b_tilde_at(x)) <= tol))

    def check_ellipticity(self, x, xi) -> bool:
        """``theta^-1 |xi|^2 <= xi . A xi <= theta |xi|^2`` and ``A`` symmetric at every pair."""
        x = as_points(x, self.n)
        xi = as_points(xi, self.n)
        A = self.A_at(x)
        if not np.allclose(A, np.swapaxes(A, 1, 2), atol=1e-12):
            return False
        q = self.norm_A_sq(x, xi)
        e = np.einsum("mi,mi->m", xi, xi)
        slack = 1e-12 * e
        return bool(np.all(q >= e / self.theta - slack) and np.all(q <= self.theta * e + slack))

    def check_beta(self, x) -> bool:
        return bool(np.all(self.beta_at(x) > 0))


def laplacian_neumann(n: int) -> OperatorSpec:
    """``-Laplace`` with ``Bu = grad u . n`` on the Robin portion."""
    return OperatorSpec(n, label="laplacian_neumann", gamma_value=0.0)


def laplacian_robin(n: int, gamma: float) -> OperatorSpec:
    """``-Laplace`` with ``Bu = grad u . n + gamma u`` (constant ``gamma``)."""
    g = float(gamma)
    return OperatorSpec(
        n, gamma=lambda x: np.full(len(x), g), label="laplacian_robin", gamma_value=g
    )


# --------------------------------------------------------------------------- scalar fields


def central_difference_gradient(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray:
    """Central differences with the scale-aware step ``1e-5 (1 + |x|)``."""
    x = as_points(x)
    m, n = x.shape
    h = 1e-5 * (1.0 + _norm(x))
    grad = np.empty((m, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        step = h[:, None] * e
        grad[:, i] = (f(x + step) - f(x - step)) / (2 * h)
    return grad


@dataclass(frozen=True)
class ScalarField:
    """A function on the closed domain with an optional analytic gradient."""

    value: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.value(as_points(x)), dtype=float)

    def grad(self, x) -> np.ndarray:
        x = as_points(x)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float).reshape(x.shape)
        return central_difference_gradient(self.value, x)

    @classmethod
    def constant(cls, value: float, label: str = "") -> "ScalarField":
        v = float(value)
        return cls(lambda x: np.full(len(x), v), lambda x: np.zeros_like(x), label or f"const {v}")


# --------------------------------------------------------------------------- configuration


class ConfigError(ValueError):
    """Raised for malformed JSON configurations."""


def domain_from_config(cfg: dict) -> DomainSpec:
    try:
        kind = cfg["kind"]
        n = int(cfg["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"domain needs 'kind' and 'n': {exc}") from None
    try:
        if kind == "box":
            return DomainSpec.box(cfg["lower"], cfg["upper"])
        return DomainSpec(kind, n, float(cfg.get("radius", 1.0)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def operator_from_config(cfg: dict, n: int) -> OperatorSpec:
    """Build an operator from ``{"preset": ..., ...}``.

    The ``custom`` preset reads restricted arithmetic strings over ``x1..xn``
    and ``|x|``: ``"a"`` (scalar diffusion, ``A = a I``), ``"c"``, ``"beta"``,
    ``"gamma"``, and lists of ``n`` strings for ``"b_tilde"`` and ``"b"``.
    """
    preset = cfg.get("preset", "laplacian_neumann")
    if preset == "laplacian_neumann":
        return laplacian_neumann(n)
    if preset == "laplacian_robin":
        if "gamma" not in cfg:
            raise ConfigError("preset laplacian_robin needs 'gamma'")
        return laplacian_robin(n, float(cfg["gamma"]))
    if preset != "custom":
        raise ConfigError(f"unknown operator preset {preset!r}")
    try:
        kw: dict = {}
        if "a" in cfg:
            fa = expr.point_function(str(cfg["a"]), n)
            kw["A"] = lambda x, fa=fa: fa(x)[:, None, None] * np.eye(n)[None]
        for key in ("b_tilde", "b"):
            if key in cfg:
                comps = [expr.point_function(str(s), n) for s in cfg[key]]
                if len(comps) != n:
                    raise ConfigError(f"{key} needs {n} components")
                kw[key] = lambda x, comps=comps: np.column_stack([f(x) for f in comps])
        for key in ("c", "beta", "gamma"):
            if key in cfg:
                kw[key] = expr.point_function(str(cfg[key]), n)
    except expr.ExpressionError as exc:
        raise ConfigError(str(exc)) from None
    gamma_value = None
    if "gamma" in cfg:
        try:
            gamma_value = float(cfg["gamma"])
        except (TypeError, ValueError):
            gamma_value = None
    symmetric = bool(cfg.get("symmetric", cfg.get("b_tilde") == cfg.get("b")))
    return OperatorSpec(
        n, symmetric=symmetric, theta=float(cfg.get("theta", 1.0)), label="custom",
        gamma_value=gamma_value, **kw,
    )


def from_config(cfg: dict) -> tuple[DomainSpec, OperatorSpec]:
    """Domain and operator from a parsed JSON config (see the README for the schema)."""
    if not isinstance(cfg, dict) or "domain" not in cfg:
        raise ConfigError("config must be an object with a 'domain' entry")
    domain = domain_from_config(cfg["domain"])
    operator = operator_from_config(cfg.get("operator", {}), domain.n)
    return domain, operator
