"""Verification probes along exhaustions: Khas'minskii ratios, null-criticality,
flux constancy and the best constant outside compacts.

Each probe returns a :class:`VerificationReport` whose verdict can be
recomputed from the stored per-level data with :meth:`VerificationReport.reverify`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .discrete import RadialGrid, discrete_green, discretize, principal_eigenvalue
from .domain import DomainSpec, OperatorSpec, exhaustion_member, laplacian_neumann
from .quadrature import hemisphere_rule, sphere_rule

SCHEMA = "hardy-forge/1"


class LevelSetError(ValueError):
    """A level surface could not be located on the rays."""


# --------------------------------------------------------------------------- reports


@dataclass
class VerificationReport:
    probe: str
    levels: list
    fit: dict
    verdict: str
    tolerances: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, **_plain(asdict(self))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def reverify(self) -> str:
        """Re-apply the probe's decision rule to the stored levels."""
        return DECISION_RULES[self.probe](self.levels, self.fit, self.tolerances)

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        d = {k: v for k, v in d.items() if k != "schema"}
        return cls(**d)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------- Khas'minskii


def _khasminskii_rule(levels, fit, tol) -> str:
    vals = [lv["ratio"] for lv in levels]
    decreasing = vals[0] >= tol["factor"] * vals[-1]
    return "Decaying" if decreasing and vals[-1] <= tol["final"] else "NotDecaying"


def khasminskii_probe(
    u0: Callable,
    u1: Callable,
    domain: DomainSpec,
    K_max: int = 12,
    samples: int = 2000,
    seed: int = 0,
    final: float = 1e-2,
    factor: float = 2.0,
) -> VerificationReport:
    """Max of ``u0/u1`` over samples of ``Omega \\ Omega_k`` for ``k = 1..K_max``.

    Decaying iff the first value is at least ``factor`` times the last and the
    last is at most ``final``.
    """
    rng = np.random.default_rng(seed)
    levels = []
    for k in range(1, K_max + 1):
        member = exhaustion_member(domain, k)
        pts = member.sample_complement(rng, samples)
        a = np.asarray(u0(pts), float)
        b = np.asarray(u1(pts), float)
        if np.any(b <= 0):
            raise ValueError(f"u1 is not positive on the complement of level {k}")
        levels.append({"k": k, "R": float(member.outer), "ratio": float(np.max(a / b))})
    vals = np.array([lv["ratio"] for lv in levels])
    fit = {
        "strictly_decreasing": bool(np.all(np.diff(vals) < 0)),
        "decay_factor": float(vals[0] / vals[-1]) if vals[-1] > 0 else float("inf"),
        "final": float(vals[-1]),
    }
    tol = {"final": final, "factor": factor}
    return VerificationReport("khasminskii", levels, fit, _khasminskii_rule(levels, fit, tol), tol)


# --------------------------------------------------------------------------- level sets on rays


def _directions(n: int, hemisphere: bool, m: int):
    return hemisphere_rule(n, m) if hemisphere else sphere_rule(n, m)


def level_radii(t_field: Callable, center, dirs: np.ndarray, level: float, r_lo: float, r_hi: float, iters: int = 80) -> np.ndarray:
    """Vectorised bisection for ``t(center + r theta) = level`` on each ray.

    ``t`` must exceed ``level`` at ``r_lo`` and fall below it at ``r_hi`` on
    every ray; the upper bracket is doubled (up to 60 times) where needed.
    """
    c = np.asarray(center, float)
    m = len(dirs)
    lo = np.full(m, float(r_lo))
    hi = np.full(m, float(r_hi))
    f_lo = np.asarray(t_field(c + lo[:, None] * dirs), float) - level
    if np.any(f_lo <= 0):
        raise LevelSetError(f"level {level:g} is not enclosed: t <= level at the inner bracket")
    for _ in range(60):
        f_hi = np.asarray(t_field(c + hi[:, None] * dirs), float) - level
        bad = f_hi > 0
        if not np.any(bad):
            break
        hi[bad] *= 2.0
    else:
        raise LevelSetError(f"level {level:g} not reached on some rays")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = np.asarray(t_field(c + mid[:, None] * dirs), float) - level
        up = f > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.max((hi - lo) / hi) < 1e-15:
            break
    return 0.5 * (lo + hi)


def level_flux(grad: Callable, operator: OperatorSpec, center, radii: np.ndarray, dirs: np.ndarray, weights: np.ndarray) -> float:
    """``int_{t = level} A grad G . grad G / |grad G| d sigma`` for a star-shaped level surface.

    On the surface ``r(theta)`` the measure is ``r^{n-1} / (theta . nu)`` times
    the sphere measure, with ``nu = -grad G / |grad G|`` the outward normal.
    """
    n = dirs.shape[1]
    pts = np.asarray(center, float) + radii[:, None] * dirs
    g = np.asarray(grad(pts), float)
    num = operator.norm_A_sq(pts, g)
    den = -np.einsum("mi,mi->m", dirs, g)
    if np.any(den <= 0):
        raise LevelSetError("level surface is not star-shaped about the centre")
    return float(np.sum(weights * radii ** (n - 1) * num / den))


def flux_constancy_check(
    G_phi,
    operator: OperatorSpec,
    t1: float,
    t2: float,
    center=None,
    hemisphere: bool = False,
    m: int = 32,
    r_lo: Optional[float] = None,
) -> dict:
    """Relative difference of the fluxes of ``A grad G_phi`` through ``{G_phi = t1}`` and ``{G_phi = t2}``.

    Level surfaces are found by root-finding along the rays of a product rule
    about ``center`` (the upper half of the sphere with ``hemisphere``).
    Both levels must lie below ``G_phi`` on the support of the density.
    """
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    dens = getattr(G_phi, "density", None)
    n = operator.n
    if center is None:
        center = np.zeros(n)
    if dens is not None:
        dirs_s, _ = sphere_rule(n, 12)
        rim = dens.c + dens.radius * dirs_s
        if np.min(G_phi(rim)) <= t2 or np.max(G_phi(dens.c[None])) <= t2:
            raise ValueError(f"level {t2:g} meets the support of the density")
        if r_lo is None:
            r_lo = np.linalg.norm(dens.c - center) + dens.radius
    if r_lo is None:
        r_lo = 1e-6
    dirs, w = _directions(n, hemisphere, m)
    fluxes = []
    for t in (t1, t2):
        radii = level_radii(G_phi, center, dirs, t, r_lo, 2.0 * r_lo)
        fluxes.append(level_flux(G_phi.grad, operator, center, radii, dirs, w))
    rel = abs(fluxes[0] - fluxes[1]) / abs(fluxes[0])
    return {"flux_t1": fluxes[0], "flux_t2": fluxes[1], "relative_difference": rel}


# --------------------------------------------------------------------------- null-criticality


def _null_rule(levels, fit, tol) -> str:
    inc = np.array([lv["increment"] for lv in levels])
    w = tol["window"]
    if len(inc) < w + 1:
        return "Inconclusive"
    last = inc[-(w + 1):]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = last[1:] / last[:-1]
    if np.all(np.isfinite(ratios)) and np.all((ratios >= 0) & (ratios <= tol["ratio_max"])):
        return "Convergent"
    if np.all(last[1:] >= tol["slope_min"] * max(abs(inc[0]), 1e-300)):
        return "Divergent"
    return "Inconclusive"


def _coarea_increment(v, W, t_field, center, dirs, w, r_lo, hi_level, lo_level, nodes: int = 24) -> float:
    """``int_{lo < t < hi} v^2 W dx`` via the coarea formula, Gauss-Legendre in ``log t``."""
    n = dirs.shape[1]
    y, wy = np.polynomial.legendre.leggauss(nodes)
    a, b = np.log(lo_level), np.log(hi_level)
    s = 0.5 * (b - a) * (y + 1) + a
    wy = 0.5 * (b - a) * wy
    total = 0.0
    for sk, wk in zip(s, wy):
        level = np.exp(sk)
        radii = level_radii(t_field, center, dirs, level, r_lo, 2 * r_lo)
        pts = np.asarray(center, float) + radii[:, None] * dirs
        g = t_field.grad(pts)
        den = -np.einsum("mi,mi->m", dirs, g)
        if np.any(den <= 0):
            raise LevelSetError("level surface is not star-shaped about the centre")
        # int_{t = level} f / |grad t| d sigma with d sigma = r^{n-1} |grad t| / (-theta . grad t) d theta
        f = np.asarray(v(pts), float) ** 2 * np.asarray(W(pts), float)
        surface = float(np.sum(w * radii ** (n - 1) * f / den))
        total += wk * level * surface
    return total


def _sandwich_increment(v, W, t_field, center, dirs, w, r_lo, hi_level, lo_level, per_unit_log: int = 400) -> float:
    """``int_{lo < t < hi} v^2 W dx`` by masked midpoint summation on a log-polar grid."""
    n = dirs.shape[1]
    r_in = level_radii(t_field, center, dirs, hi_level, r_lo, 2 * r_lo).min() * 0.98
    r_out = level_radii(t_field, center, dirs, lo_level, r_lo, 2 * r_lo).max() * 1.02
    cells = max(8, int(per_unit_log * np.log(r_out / r_in)))
    edges = np.linspace(np.log(r_in), np.log(r_out), cells + 1)
    mids = np.exp(0.5 * (edges[1:] + edges[:-1]))
    ds = edges[1] - edges[0]
    total = 0.0
    c = np.asarray(center, float)
    for r in mids:
        pts = c + r * dirs
        t = np.asarray(t_field(pts), float)
        inside = (t > lo_level) & (t < hi_level)
        if not np.any(inside):
            continue
        f = np.asarray(v(pts[inside]), float) ** 2 * np.asarray(W(pts[inside]), float)
        total += float(np.sum(w[inside] * f)) * r**n * ds
    return total


def null_criticality_probe(
    v,
    W,
    t_field,
    alpha: float,
    decades: int = 4,
    method: str = "coarea",
    center=None,
    hemisphere: bool = False,
    r_lo: float = 1.0,
    m: int = 16,
    analytic_slope: Optional[float] = None,
    slope_tol: float = 0.1,
    slope_min: float = 1e-3,
    symmetric: bool = True,
) -> VerificationReport:
    """Growth of ``I(eps) = int_{eps < t < alpha} v^2 W dx`` as ``eps = alpha 10^-k`` shrinks.

    ``method="coarea"`` integrates over level surfaces of ``t`` (found on
    rays from ``center``); ``method="sandwich"`` sums the integrand over a
    log-polar grid masked to the sandwich ``{eps < t < alpha}``.  Divergent
    iff every one of the last three decades adds at least ``slope_min`` times
    the first decade's amount and the increments do not decay geometrically.
    Only symmetric operators are supported.
    """
    if not symmetric:
        raise NotImplementedError("null-criticality is verified for symmetric operators only")
    if method not in ("coarea", "sandwich"):
        raise ValueError(f"unknown method {method!r}")
    dirs, w = _directions(len(np.atleast_1d(center)) if center is not None else 3, hemisphere, m)
    n = dirs.shape[1]
    if center is None:
        center = np.zeros(n)
    inc_fn = _coarea_increment if method == "coarea" else _sandwich_increment
    levels = []
    total = 0.0
    for k in range(1, decades + 1):
        hi_level, lo_level = alpha * 10.0 ** (-(k - 1)), alpha * 10.0 ** (-k)
        inc = inc_fn(v, W, t_field, center, dirs, w, r_lo, hi_level, lo_level)
        total += inc
        levels.append({"k": k, "eps": lo_level, "increment": inc, "I": total})
    inc = np.array([lv["increment"] for lv in levels])
    slope = float(np.mean(inc[-3:]))
    fit = {"slope_per_decade": slope, "method": method}
    if analytic_slope is not None:
        fit["analytic_slope"] = float(analytic_slope)
        fit["relative_slope_error"] = abs(slope - analytic_slope) / abs(analytic_slope)
    tol = {"window": 3, "ratio_max": 0.9, "slope_min": slope_min, "slope_tol": slope_tol}
    return VerificationReport("null_criticality", levels, fit, _null_rule(levels, fit, tol), tol)


def radial_null_criticality(
    v_of_r: Callable, W_of_r: Callable, t_of_r: Callable, n: int, alpha: float, decades: int = 4,
    r_lo: float = 1.0, analytic_slope: Optional[float] = None, slope_min: float = 1e-3,
) -> VerificationReport:
    """Radial reduction: ``I(eps) = |S^{n-1}| int v(r)^2 W(r) r^{n-1} dr`` between the level radii."""
    from .quadrature import unit_sphere_area

    omega = unit_sphere_area(n)

    def radius(level):
        f = lambda lr: float(t_of_r(np.exp(lr))) - level  # noqa: E731
        a, b = np.log(r_lo), np.log(r_lo) + 1.0
        while f(b) > 0:
            b += 1.0
        if f(a) <= 0:
            raise LevelSetError(f"level {level:g} not enclosed by r_lo")
        return np.exp(optimize.brentq(f, a, b, xtol=1e-15, rtol=1e-15))

    levels = []
    total = 0.0
    r_prev = radius(alpha)
    for k in range(1, decades + 1):
        eps = alpha * 10.0 ** (-k)
        r_next = radius(eps)
        g = lambda s: float(v_of_r(np.exp(s)) ** 2 * W_of_r(np.exp(s)) * np.exp(n * s))  # noqa: E731
        inc = omega * integrate.quad(g, np.log(r_prev), np.log(r_next), epsrel=1e-12, limit=200)[0]
        total += inc
        levels.append({"k": k, "eps": eps, "increment": inc, "I": total})
        r_prev = r_next
    inc = np.array([lv["increment"] for lv in levels])
    fit = {"slope_per_decade": float(np.mean(inc[-3:])), "method": "radial"}
    if analytic_slope is not None:
        fit["analytic_slope"] = float(analytic_slope)
        fit["relative_slope_error"] = abs(fit["slope_per_decade"] - analytic_slope) / abs(analytic_slope)
    tol = {"window": 3, "ratio_max": 0.9, "slope_min": slope_min, "slope_tol": 0.1}
    return VerificationReport("null_criticality", levels, fit, _null_rule(levels, fit, tol), tol)


# --------------------------------------------------------------------------- optimality at infinity


def radial_eigenvalue(
    W_of_points: Callable, n: int, inner: float, outer: float, per_unit_log: float, operator: Optional[OperatorSpec] = None,
    inner_bc: str = "dirichlet",
):
    grid = RadialGrid.with_density(n, inner, outer, per_unit_log, inner_bc=inner_bc)
    system = discretize(operator or laplacian_neumann(n), grid).with_weight(W_of_points)
    return principal_eigenvalue(system), system


def _richardson(values: Sequence[float]) -> tuple[float, float]:
    """Second-order extrapolation of a sequence on grids refined by 2; also the observed order."""
    l1, l2, l3 = values[-3:]
    d1, d2 = l1 - l2, l2 - l3
    order = float(np.log2(abs(d1 / d2))) if d2 != 0 and d1 != 0 else float("inf")
    return l3 + (l3 - l2) / 3.0, order


def _fit_limit(R: np.ndarray, lam: np.ndarray, inner: float) -> dict:
    """Fit ``lambda(R) = limit + C / (log(R/inner) + d)^2`` through three levels (exact when ``d`` solves).

    Falls back to least squares with ``d = 0`` when no offset fits.
    """
    ell = np.log(R / inner)

    def solve_for(d):
        X = np.column_stack([np.ones_like(ell), 1.0 / (ell + d) ** 2])
        coef, *_ = np.linalg.lstsq(X, lam, rcond=None)
        return coef, X @ coef - lam

    if len(R) >= 3:
        def resid(d):
            coef, r = solve_for(d)
            return r[-1]

        grid = np.linspace(-0.9 * ell.min(), 5.0, 400)
        vals = np.array([resid(d) for d in grid])
        roots = [
            optimize.brentq(resid, grid[i], grid[i + 1])
            for i in range(len(grid) - 1)
            if np.sign(vals[i]) != np.sign(vals[i + 1]) and np.isfinite(vals[i]) and np.isfinite(vals[i + 1])
        ]
        if roots:
            d = min(roots, key=abs)
            coef, r = solve_for(d)
            return {"limit": float(coef[0]), "rate": float(coef[1]), "offset": float(d), "model": "limit + C/(log(R/inner)+d)^2"}
    coef, r = solve_for(0.0)
    return {"limit": float(coef[0]), "rate": float(coef[1]), "offset": 0.0, "model": "limit + C/log(R/inner)^2"}


def _optimality_rule(levels, fit, tol) -> str:
    lam = np.array([lv["lambda0"] for lv in levels])
    above = bool(np.all(lam >= tol["target"] - tol["tol_up"]))
    monotone = bool(np.all(np.diff(lam) <= tol["tol_up"]))
    close = abs(fit["limit"] - tol["target"]) <= tol["tol_limit"]
    return "PASS" if above and monotone and close else "FAIL"


def optimality_at_infinity_probe(
    W_of_points: Callable,
    n: int,
    inner: float = 2.0,
    radii: Sequence[float] = (10.0, 100.0, 1000.0),
    per_unit_log: float = 200.0,
    refinements: int = 3,
    operator: Optional[OperatorSpec] = None,
    target: float = 1.0,
    tol_up: float = 0.02,
    tol_limit: float = 0.05,
) -> VerificationReport:
    """``lambda_0`` of ``(P - lambda W)`` on annuli ``inner < |x| < R`` with Dirichlet ends.

    Each annulus is solved on ``refinements`` grids (cells doubling) and
    Richardson-extrapolated; the limit in ``R`` comes from :func:`_fit_limit`.
    The verdict is PASS when every extrapolated ``lambda_0`` is at least
    ``target - tol_up``, the sequence does not increase (beyond ``tol_up``)
    and the fitted limit is within ``tol_limit`` of ``target``.  The record
    also keeps whether every value is below ``target + tol_up``.
    """
    levels = []
    for k, R in enumerate(radii, start=1):
        vals, residuals, nodes = [], [], []
        for j in range(refinements):
            eig, system = radial_eigenvalue(W_of_points, n, inner, R, per_unit_log * 2**j, operator)
            vals.append(eig.lambda0)
            residuals.append(eig.residual)
            nodes.append(system.size)
        lam, order = _richardson(vals) if refinements >= 3 else (vals[-1], float("nan"))
        levels.append({
            "k": k, "R": float(R), "h": float(np.log(R / inner) / (nodes[-1] + 1)),
            "lambda0": float(lam), "raw": vals, "observed_order": order,
            "residual": float(max(residuals)), "nodes": nodes,
        })
    R = np.array([lv["R"] for lv in levels])
    lam = np.array([lv["lambda0"] for lv in levels])
    fit = _fit_limit(R, lam, inner)
    fit["all_below_upper_bound"] = bool(np.all(lam <= target + tol_up))
    tol = {"target": target, "tol_up": tol_up, "tol_limit": tol_limit}
    return VerificationReport("optimality_at_infinity", levels, fit, _optimality_rule(levels, fit, tol), tol)




# --------------------------------------------------------------------------- Green cross-validation


def green_cross_validation(
    h: float = 1.0 / 64,
    source=(0.0, 0.0, 0.25),
    lower=(-0.5, -0.5, 0.0),
    upper=(0.5, 0.5, 0.75),
    min_distance: float = 5.0,
) -> dict:
    """Discrete Neumann Green function on a half-space box against the images kernel.

    The box bottom is the Neumann plane; the other faces carry the images
    kernel as Dirichlet data, so the discrete solve approximates the kernel
    itself.  Reports the max relative error over nodes at least
    ``min_distance * h`` from the source.
    """
    from .discrete import CartesianGridSpec
    from .green import images_kernel

    n = len(lower)
    domain = DomainSpec.half_space(n)
    kernel = images_kernel(domain)
    system = discretize(laplacian_neumann(n), CartesianGridSpec(tuple(lower), tuple(upper), h))
    y = np.asarray(source, float)
    pts = system.points()
    iy = int(np.argmin(np.linalg.norm(pts - y, axis=1)))
    y = pts[iy]
    g = discrete_green(system, iy, dirichlet_values=kernel(system.dirichlet_nodes, y[None]))
    far = np.linalg.norm(pts - y, axis=1) >= min_distance * h
    exact = kernel(pts[far], y[None])
    err = np.abs(g[far] - exact) / exact
    return {"h": h, "nodes": system.size, "max_relative_error": float(err.max()), "median_relative_error": float(np.median(err))}


# --------------------------------------------------------------------------- eigenvalue vs maximum principle


def _consistency_rule(levels, fit, tol) -> str:
    ok = all(lv["below_passes"] and not lv["above_passes"] for lv in levels)
    return "PASS" if ok else "FAIL"


def eigen_max_principle_consistency(systems: Sequence, delta: float = 0.1, trials: int = 20, seed: int = 0) -> VerificationReport:
    """The maximum principle for ``P - lambda W`` must hold at ``lambda_0 - delta`` and fail at ``lambda_0 + delta``.

    ``systems`` are weighted discrete systems, one per truncation.
    """
    from .discrete import max_principle_probe

    levels = []
    for k, system in enumerate(systems, start=1):
        eig = principal_eigenvalue(system)
        below = max_principle_probe(system, eig.lambda0 - delta, trials, seed)
        above = max_principle_probe(system, eig.lambda0 + delta, trials, seed)
        levels.append({
            "k": k, "lambda0": eig.lambda0, "residual": eig.residual, "nodes": system.size,
            "below_passes": below.passed, "above_passes": above.passed,
            "below_min": min(below.min_entries) if below.min_entries else float("nan"),
            "above_min": min(above.min_entries) if above.min_entries else float("nan"),
        })
    lam = np.array([lv["lambda0"] for lv in levels])
    fit = {"monotone_non_increasing": bool(np.all(np.diff(lam) <= 1e-9 * np.abs(lam[:-1])))}
    tol = {"delta": delta}
    return VerificationReport("eigen_max_principle", levels, fit, _consistency_rule(levels, fit, tol), tol)


DECISION_RULES = {
    "khasminskii": _khasminskii_rule,
    "null_criticality": _null_rule,
    "optimality_at_infinity": _optimality_rule,
    "eigen_max_principle": _consistency_rule,
}
