"""Executable test of optimality for one-dimensional weights of ``-y''``.

A pair ``(w, psi)`` on an interval ``(lo, hi)`` is judged on three counts:
``psi > 0`` solves ``-psi'' = w psi``, and both ``1/psi^2`` and ``psi^2 w``
have divergent integrals at each end.  Divergence is decided from partial
integrals over decades approaching the end.  An explicit ``Inconclusive``
class covers integrands that neither grow nor decay clearly.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .construct import OneDimWeight, fourth_order_second_derivative

AT_ZERO = "AtZero"
AT_INFINITY = "AtInfinity"
DIVERGENT = "Divergent"
CONVERGENT = "Convergent"
INCONCLUSIVE = "Inconclusive"
OPTIMAL = "Optimal"
NOT_OPTIMAL = "NotOptimal"


# --------------------------------------------------------------------------- grids near the ends


def _coordinate(interval: tuple):
    """Map ``s in R`` onto the interval so that ``s -> -inf`` / ``+inf`` approach the two ends.

    Returns ``(t(s), half-width of a unit step at s)``; the step is what a
    stencil of relative size one may use without leaving the interval.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if np.isinf(hi):
        def t_of(s):
            return lo + np.exp(s)

        def room(s):
            return np.exp(s)
    else:
        def t_of(s):
            e = np.exp(s)
            return (lo + hi * e) / (1 + e)

        def room(s):
            t = t_of(s)
            return np.minimum(t - lo, hi - t)
    return t_of, room


def ode_residual(w1d: OneDimWeight, h_log: float = 1e-3, points: int = 801, span: float = 9.2) -> float:
    """``max |-psi'' - w psi| / max(1, |w psi|)`` on a grid that is log-spaced towards both ends.

    The grid covers ``s in [-span, span]`` of the end-adapted coordinate
    (``t = lo + e^s`` on half lines, logit-type on finite intervals); the
    five-point stencil uses the local step ``h_log`` times the distance to the
    nearer end.  Evaluation is in extended precision when the callables allow
    it.  Returns ``inf`` if ``psi <= 0`` somewhere on the grid.
    """
    t_of, room = _coordinate(w1d.interval)
    s = np.linspace(-span, span, points).astype(np.longdouble)
    t = t_of(s)
    h = h_log * room(s)
    psi = np.asarray(w1d.psi(t))
    if np.any(~np.isfinite(psi)) or np.any(psi <= 0):
        return float("inf")
    lhs = -fourth_order_second_derivative(w1d.psi, t, h)
    wpsi = np.asarray(w1d.w(t)) * psi
    res = np.abs(lhs - wpsi) / np.maximum(1.0, np.abs(wpsi))
    return float(np.max(res))


# --------------------------------------------------------------------------- divergence classification


@dataclass(frozen=True)
class DivergenceVerdict:
    side: str
    cls: str
    growth_slope: float
    partials: tuple
    estimate: Optional[float] = None
    diagnostic: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("cls")
        d["partials"] = [list(p) for p in self.partials]
        return d


def _decade_map(interval: tuple, side: str):
    """``(point(k), anchor)``: the truncation ``k`` decades from the end and the fixed inner limit."""
    lo, hi = float(interval[0]), float(interval[1])
    if np.isinf(hi):
        if side == AT_ZERO:
            return (lambda k: lo + 10.0 ** (-k)), lo + 1.0
        return (lambda k: lo + 10.0**k), lo + 1.0
    half = 0.5 * (hi - lo)
    mid = lo + half
    if side == AT_ZERO:
        return (lambda k: lo + half * 10.0 ** (-k)), mid
    return (lambda k: hi - half * 10.0 ** (-k)), mid


def _decade_integral(f: Callable, interval: tuple, side: str, k: float) -> tuple[float, bool]:
    """Integral over decade ``k`` (between truncations ``k-1`` and ``k``) in the log variable."""
    lo, hi = float(interval[0]), float(interval[1])
    ln10 = np.log(10.0)
    if np.isinf(hi):
        sign = -1.0 if side == AT_ZERO else 1.0

        def g(y):
            d = np.longdouble(10.0) ** (sign * y)
            return float(f(np.array([lo + d]))[0] * d) * ln10
    else:
        half = 0.5 * (hi - lo)

        def g(y):
            # extended precision resolves t near hi, where hi - t is far below the float64 spacing
            d = np.longdouble(half) * np.longdouble(10.0) ** (-y)
            t = lo + d if side == AT_ZERO else hi - d
            return float(f(np.array([t]))[0] * d) * ln10

    # roundoff near a finite end can trip quad's own warning; the error estimate decides
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, k - 1, k, epsabs=0.0, epsrel=1e-9, limit=200)
            ok = np.isfinite(val) and err <= 1e-4 * max(abs(val), 1e-300)
        except (ValueError, ZeroDivisionError, FloatingPointError):
            val, ok = float("nan"), False
    return float(val), bool(ok)


def classify_divergence(
    integrand: Callable[[np.ndarray], np.ndarray],
    side: str,
    interval: tuple = (0.0, np.inf),
    decades: int = 12,
    slope_min: float = 1e-3,
    window: int = 4,
    ratio_max: float = 0.9,
) -> DivergenceVerdict:
    """Classify ``int integrand`` near one end of ``interval``.

    Partial integrals run from the anchor (``lo + 1`` on half lines, the
    midpoint on finite intervals) to truncations ``10^-k`` (or ``10^k``) away
    from the end, ``k = 1..decades``.  With increments ``d_k`` per decade:

    * Convergent: the last ``window`` ratios ``d_{k+1} / d_k`` lie in ``[0, ratio_max]``;
      the estimate adds the geometric tail.
    * Divergent: otherwise, if the last ``window`` increments all exceed
      ``slope_min`` times the first increment (the relative threshold keeps
      the verdict unchanged when the integrand is rescaled).
    * Inconclusive: everything else, including quadrature failures.
    """
    if side not in (AT_ZERO, AT_INFINITY):
        raise ValueError(f"side must be {AT_ZERO!r} or {AT_INFINITY!r}")
    point, anchor = _decade_map(interval, side)
    incs, diag = [], ""
    for k in range(1, decades + 1):
        val, ok = _decade_integral(integrand, interval, side, k)
        if not ok:
            diag = f"quadrature failed in decade {k}"
            break
        incs.append(val)
    d = np.asarray(incs)
    partial_values = np.cumsum(d)
    # the first increment spans from the anchor-side decade; report truncation points
    partials = tuple((float(point(k + 1)), float(v)) for k, v in enumerate(partial_values))
    if len(d) >= 2:
        tail = min(len(d), window + 2)
        slope = float(np.polyfit(np.arange(tail), partial_values[-tail:], 1)[0])
    else:
        slope = float("nan")
    if diag or len(d) < window + 1:
        return DivergenceVerdict(side, INCONCLUSIVE, slope, partials, None, diag or "too few decades")
    if np.any(d < 0):
        return DivergenceVerdict(side, INCONCLUSIVE, slope, partials, None, "negative increments: integrand not >= 0")
    last = d[-(window + 1):]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = last[1:] / last[:-1]
    if np.all(np.isfinite(ratios)) and np.all(ratios <= ratio_max):
        r = float(ratios[-1])
        estimate = float(partial_values[-1] + d[-1] * r / (1.0 - r))
        return DivergenceVerdict(side, CONVERGENT, slope, partials, estimate)
    if np.all(last[1:] == 0):
        return DivergenceVerdict(side, CONVERGENT, slope, partials, float(partial_values[-1]))
    threshold = slope_min * max(abs(d[0]), 1e-300)
    if np.all(last[1:] >= threshold):
        return DivergenceVerdict(side, DIVERGENT, slope, partials)
    return DivergenceVerdict(side, INCONCLUSIVE, slope, partials, None, "increments neither decay nor persist")


# --------------------------------------------------------------------------- optimality


@dataclass(frozen=True)
class OptimalityVerdict:
    ode_ok: bool
    ode_residual: float
    cond2: tuple
    cond3: tuple
    overall: str
    interval: tuple = (0.0, np.inf)

    def to_dict(self) -> dict:
        return {
            "interval": [float(v) for v in self.interval],
            "ode_ok": self.ode_ok,
            "ode_residual": self.ode_residual,
            "cond2": {v.side: v.to_dict() for v in self.cond2},
            "cond3": {v.side: v.to_dict() for v in self.cond3},
            "overall": self.overall,
        }


def combine(ode_ok: bool, verdicts) -> str:
    classes = [v.cls for v in verdicts]
    if not ode_ok or CONVERGENT in classes:
        return NOT_OPTIMAL
    if INCONCLUSIVE in classes:
        return INCONCLUSIVE
    return OPTIMAL


def is_optimal_1d(w1d: OneDimWeight, ode_tol: float = 1e-6, decades: int = 12, slope_min: float = 1e-3) -> OptimalityVerdict:
    """ODE residual plus divergence of ``1/psi^2`` and ``psi^2 w`` at both ends."""
    interval = tuple(float(v) for v in w1d.interval)
    try:
        res = ode_residual(w1d)
    except (ValueError, FloatingPointError, ZeroDivisionError):
        res = float("inf")
    ode_ok = bool(res <= ode_tol)

    def inv_sq(t):
        return 1.0 / np.asarray(w1d.psi(t)) ** 2

    def energy(t):
        return np.asarray(w1d.psi(t)) ** 2 * np.asarray(w1d.w(t))

    kw = dict(interval=interval, decades=decades, slope_min=slope_min)
    cond2 = (classify_divergence(inv_sq, AT_ZERO, **kw), classify_divergence(inv_sq, AT_INFINITY, **kw))
    cond3 = (classify_divergence(energy, AT_ZERO, **kw), classify_divergence(energy, AT_INFINITY, **kw))
    return OptimalityVerdict(ode_ok, res, cond2, cond3, combine(ode_ok, cond2 + cond3), interval)
