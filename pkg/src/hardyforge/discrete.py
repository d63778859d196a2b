"""Finite-difference systems for ``(P - lambda W, B)`` and the linear algebra on them.

Every system is stored in weak (volume-scaled) form: row ``i`` of ``P`` is the
discrete operator at node ``i`` multiplied by that node's control volume, so
``phi^T P phi`` approximates the bilinear form and the symmetric presets give
symmetric matrices.  Two grid families are supported:

* :class:`RadialGrid`: radial functions on an annulus, uniform in ``log r``;
* :class:`CartesianGridSpec`: boxes aligned with the axes, optionally masked,
  with a Robin bottom face ``x_n = lo_n`` and Dirichlet elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domain import OperatorSpec
from .quadrature import unit_sphere_area

INTERIOR, ROBIN, DIRICHLET = 0, 1, 2


class GridError(ValueError):
    """Grid and boundary data do not fit together."""


class EigenSolverError(RuntimeError):
    def __init__(self, message: str, history: list):
        super().__init__(f"{message}; residual history tail {history[-5:]}")
        self.history = history


class SingularSystemError(RuntimeError):
    """The discrete operator is singular (or numerically so)."""


# --------------------------------------------------------------------------- grids


@dataclass(frozen=True)
class RadialGrid:
    """Nodes ``r_i = inner e^{i ds}``, ``i = 0..cells``, for radial functions in ``R^n``.

    ``inner_bc``/``outer_bc`` are ``"dirichlet"`` or ``"robin"``; a Robin end
    carries ``(A grad u + u b_tilde) . n * beta + gamma u = 0`` with the outward
    normal of the annulus.
    """

    n: int
    inner: float
    outer: float
    cells: int
    inner_bc: str = "dirichlet"
    outer_bc: str = "dirichlet"

    def __post_init__(self):
        if not (0 < self.inner < self.outer):
            raise GridError(f"need 0 < inner < outer, got {self.inner}, {self.outer}")
        if self.cells < 2:
            raise GridError("need at least two cells")
        for bc in (self.inner_bc, self.outer_bc):
            if bc not in ("dirichlet", "robin"):
                raise GridError(f"unknown radial boundary condition {bc!r}")

    @classmethod
    def with_density(cls, n: int, inner: float, outer: float, per_unit_log: float, **kw) -> "RadialGrid":
        cells = max(2, int(np.ceil(per_unit_log * np.log(outer / inner))))
        return cls(n, inner, outer, cells, **kw)

    @property
    def ds(self) -> float:
        return np.log(self.outer / self.inner) / self.cells

    @property
    def radii(self) -> np.ndarray:
        return self.inner * np.exp(self.ds * np.arange(self.cells + 1))

    def kinds(self) -> np.ndarray:
        k = np.full(self.cells + 1, INTERIOR)
        k[0] = ROBIN if self.inner_bc == "robin" else DIRICHLET
        k[-1] = ROBIN if self.outer_bc == "robin" else DIRICHLET
        return k

    def points(self, radii: np.ndarray) -> np.ndarray:
        pts = np.zeros((len(radii), self.n))
        pts[:, 0] = radii
        return pts

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.n, self.inner, self.outer, self.cells * factor, self.inner_bc, self.outer_bc)


@dataclass(frozen=True)
class CartesianGridSpec:
    """Uniform grid of spacing ``h`` on the box ``[lower, upper]``.

    ``robin_bottom`` makes the face ``x_n = lower_n`` Robin; every other face
    is Dirichlet.  ``mask`` (optional) keeps only nodes where it is true; the
    remaining nodes are treated as Dirichlet nodes.
    """

    lower: tuple
    upper: tuple
    h: float
    robin_bottom: bool = True
    mask: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple:
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        counts = (hi - lo) / self.h
        if np.any(np.abs(counts - np.round(counts)) > 1e-9 * np.maximum(1, counts)):
            raise GridError(f"box {self.lower}..{self.upper} is not a multiple of h = {self.h}")
        return tuple(int(round(c)) + 1 for c in counts)

    def coordinates(self) -> np.ndarray:
        axes = [lo + self.h * np.arange(m) for lo, m in zip(self.lower, self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in mesh], axis=1)

    def kinds(self) -> np.ndarray:
        shape = self.shape
        idx = np.indices(shape).reshape(self.n, -1).T
        on_face = np.any((idx == 0) | (idx == np.asarray(shape) - 1), axis=1)
        bottom = idx[:, -1] == 0
        side = np.any((idx[:, :-1] == 0) | (idx[:, :-1] == np.asarray(shape[:-1]) - 1), axis=1)
        top = idx[:, -1] == shape[-1] - 1
        k = np.where(on_face, DIRICHLET, INTERIOR)
        if self.robin_bottom:
            k[bottom & ~side & ~top] = ROBIN
        if self.mask is not None:
            inside = np.asarray(self.mask(self.coordinates()), dtype=bool)
            k[~inside] = DIRICHLET
        return k


# --------------------------------------------------------------------------- systems


@dataclass
class DiscreteSystem:
    """Volume-scaled operator on the unknown (non-Dirichlet) nodes.

    ``P`` acts on unknowns; ``boundary_coupling`` maps Dirichlet values into
    the unknown rows, so ``P u + boundary_coupling g = vol * f`` is the full
    discrete problem.  ``M_W = diag(W * vol)``; ``robin_surface`` holds the
    surface weights already folded into ``P`` at Robin nodes.
    """

    grid: object
    P: sp.csr_matrix
    vol: np.ndarray
    nodes: np.ndarray
    kinds: np.ndarray
    robin_surface: np.ndarray
    boundary_coupling: sp.csr_matrix
    dirichlet_nodes: np.ndarray
    symmetric: bool
    W: Optional[np.ndarray] = None
    operator: Optional[OperatorSpec] = None
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.P.shape[0]

    @property
    def M_W(self) -> sp.dia_matrix:
        if self.W is None:
            raise ValueError("no weight attached; use with_weight first")
        return sp.diags(self.W * self.vol)

    def points(self) -> np.ndarray:
        if isinstance(self.grid, RadialGrid):
            return self.grid.points(self.nodes)
        return self.nodes

    def with_weight(self, W) -> "DiscreteSystem":
        """Attach ``W`` sampled at the unknown nodes (callable on points, or an array)."""
        vals = np.asarray(W(self.points()) if callable(W) else W, dtype=float).reshape(-1)
        if vals.shape != (self.size,):
            raise ValueError(f"weight has {vals.size} entries for {self.size} unknowns")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError("weight samples must be finite and nonnegative")
        return DiscreteSystem(
            self.grid, self.P, self.vol, self.nodes, self.kinds, self.robin_surface,
            self.boundary_coupling, self.dirichlet_nodes, self.symmetric, vals, self.operator,
        )

    def scaled_weight(self, factor: float) -> "DiscreteSystem":
        return self.with_weight(self.W * factor)

    def asymmetry(self) -> float:
        d = (self.P - self.P.T).tocoo()
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def factor(self, shift: float = 0.0):
        """Sparse LU of ``P - shift M_W`` (cached per shift)."""
        key = float(shift)
        if key not in self._lu:
            A = sp.csc_matrix(self.P if shift == 0 else self.P - shift * self.M_W)
            lu = None
            if self.asymmetry() <= 1e-12 * abs(self.P).max():
                # symmetric shifts below lambda_0 are positive definite, so diagonal pivots are safe
                try:
                    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                   options={"SymmetricMode": True})
                except RuntimeError:
                    lu = None
                if lu is not None and not np.all(np.isfinite(lu.U.diagonal())):
                    lu = None
            if lu is None:
                try:
                    lu = spla.splu(A)
                except RuntimeError as exc:
                    raise SingularSystemError(f"matrix is singular: {exc}") from None
            self._lu[key] = lu
        return self._lu[key]

    def solve(self, rhs: np.ndarray, shift: float = 0.0) -> np.ndarray:
        x = self.factor(shift).solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("solve produced non-finite values")
        return x


def _radial_system(operator: OperatorSpec, grid: RadialGrid) -> DiscreteSystem:
    n = grid.n
    if operator.A is not None or operator.b is not None or operator.b_tilde is not None:
        raise GridError("radial grids support A = I without drift; use a Cartesian grid")
    omega = unit_sphere_area(n)
    r = grid.radii
    ds = grid.ds
    s_half = np.log(r[:-1]) + 0.5 * ds
    cond = omega * np.exp((n - 2) * s_half) / ds  # stiffness of each cell
    vol = omega * r**n * ds
    vol[0] *= 0.5
    vol[-1] *= 0.5
    N = len(r)
    diag = np.zeros(N)
    diag[:-1] += cond
    diag[1:] += cond
    diag += operator.c_at(grid.points(r)) * vol
    surface = np.zeros(N)
    kinds = grid.kinds()
    for end in (0, N - 1):
        if kinds[end] == ROBIN:
            p = grid.points(r[end : end + 1])
            ratio = float(operator.gamma_at(p)[0] / operator.beta_at(p)[0])
            surface[end] = omega * r[end] ** (n - 1)
            diag[end] += surface[end] * ratio
    full = sp.diags([diag, -cond, -cond], [0, 1, -1], format="csr")
    keep = np.flatnonzero(kinds != DIRICHLET)
    drop = np.flatnonzero(kinds == DIRICHLET)
    P = full[keep][:, keep].tocsr()
    B = full[keep][:, drop].tocsr()
    return DiscreteSystem(
        grid, P, vol[keep], r[keep], kinds[keep], surface[keep], B, r[drop], True, operator=operator
    )


def _cartesian_system(operator: OperatorSpec, spec: CartesianGridSpec) -> DiscreteSystem:
    n, h = spec.n, spec.h
    shape = spec.shape
    X = spec.coordinates()
    kinds = spec.kinds()
    N = len(X)
    A = operator.A_at(X)
    off = A.copy()
    off[:, np.arange(n), np.arange(n)] = 0.0
    if np.any(np.abs(off) > 1e-14):
        raise NotImplementedError("Cartesian assembly supports diagonal diffusion matrices only")
    strides = np.cumprod((1,) + shape[::-1][:-1])[::-1]
    idx = np.indices(shape).reshape(n, -1).T
    active = kinds != DIRICHLET
    vol = np.full(N, float(h) ** n)
    vol[kinds == ROBIN] *= 0.5

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    diag = operator.c_at(X) * vol
    for axis in range(n):
        e = np.zeros(n)
        e[axis] = 0.5 * h
        for direction in (1, -1):
            nb_idx = idx[:, axis] + direction
            inside = (nb_idx >= 0) & (nb_idx < shape[axis])
            rows_i = np.flatnonzero(active & inside)
            nb = rows_i + direction * strides[axis]
            mid = X[rows_i] + direction * e
            a_half = operator.A_at(mid)[:, axis, axis]
            bt_half = operator.b_tilde_at(mid)[:, axis]
            b_node = operator.b_at(X[rows_i])[:, axis]
            # the Robin nodes own half a cell normal to the face, a full cell along it
            scale = vol[rows_i] / (h * h)
            # conservative flux a (u_nb - u_i)/h + bt (u_nb + u_i)/2 through the face
            coef_nb = -scale * (a_half + direction * 0.5 * h * bt_half)
            coef_self = scale * (a_half - direction * 0.5 * h * bt_half)
            if axis == n - 1:
                robin_rows = kinds[rows_i] == ROBIN
                # the bottom face contributes through the Robin flux instead of a ghost pair
                normal_scale = np.where(robin_rows, 2.0, 1.0)
                coef_nb = coef_nb * normal_scale
                coef_self = coef_self * normal_scale
            drift = direction * vol[rows_i] * b_node / (2 * h)
            if axis == n - 1:
                # at a Robin node the ghost value cancels u_+ in the centred difference (added below)
                drift = np.where(kinds[rows_i] == ROBIN, 0.0, drift)
            add(rows_i, nb, coef_nb + drift)
            diag[rows_i] += coef_self
    robin = np.flatnonzero(kinds == ROBIN)
    surface = np.zeros(N)
    if len(robin):
        p = X[robin]
        surface[robin] = float(h) ** (n - 1)
        # normal flux through the face from the Robin condition: F . n = -(gamma/beta) u
        ratio = operator.gamma_at(p) / operator.beta_at(p)
        diag[robin] += surface[robin] * ratio
        # centred drift b . grad u at the face uses the one-sided mirror of the ghost value
        bn = operator.b_at(p)[:, n - 1]
        if np.any(bn != 0):
            an = operator.A_at(p)[:, n - 1, n - 1]
            btn = operator.b_tilde_at(p)[:, n - 1]
            diag[robin] += vol[robin] * bn * (ratio - btn) / an
    act = np.flatnonzero(active)
    add(act, act, diag[act])
    R = np.concatenate(rows)
    C = np.concatenate(cols)
    V = np.concatenate(vals)
    full = sp.csr_matrix((V, (R, C)), shape=(N, N))
    drop = np.flatnonzero(~active)
    P = full[act][:, act].tocsr()
    B = full[act][:, drop].tocsr()
    scale = float(np.max(np.abs(P.data))) if P.nnz else 1.0
    d = (P - P.T).tocoo()
    symmetric = bool(d.nnz == 0 or np.max(np.abs(d.data)) <= 1e-12 * scale)
    return DiscreteSystem(spec, P, vol[act], X[act], kinds[act], surface[act], B, X[drop], symmetric, operator=operator)


def discretize(operator: OperatorSpec, grid) -> DiscreteSystem:
    """Assemble the volume-scaled operator with Robin rows built from the boundary flux.

    The Robin rows are the ghost-point rows ``u_g = u_+ - 2h ((gamma/beta - b_tilde_n)/a_n) u_0``
    scaled by the half control volume; written this way they are symmetric
    whenever the operator is, and the Robin contribution is the surface term
    ``(gamma/beta) u phi`` of the weak form.
    """
    if isinstance(grid, RadialGrid):
        return _radial_system(operator, grid)
    if isinstance(grid, CartesianGridSpec):
        if grid.n != operator.n:
            raise GridError("grid and operator dimensions differ")
        return _cartesian_system(operator, grid)
    raise GridError(f"unsupported grid type {type(grid).__name__}")


# --------------------------------------------------------------------------- eigenvalues


@dataclass(frozen=True)
class EigResult:
    lambda0: float
    eigvec: np.ndarray
    residual: float
    iterations: int
    positive: bool
    shift: float


def _rayleigh(system: DiscreteSystem, x: np.ndarray, Mx: np.ndarray) -> float:
    return float(x @ (system.P @ x)) / float(x @ Mx)


def principal_eigenvalue(
    system: DiscreteSystem, tol: float = 1e-10, max_iter: int = 500, shift_factor: float = 0.9
) -> EigResult:
    """Smallest eigenvalue of ``P v = lambda M_W v`` by shift-invert power iteration.

    The iteration starts from the all-ones vector with shift 0; once the
    estimate settles (relative change below 1e-3) the shift moves to
    ``shift_factor`` times the estimate and the matrix is refactored once.
    Convergence means the relative residual ``|P v - lambda M v| / |M v|``
    is below ``tol``, or below the roundoff floor ``64 eps |P| |v| / |M v|``
    when that is larger.
    """
    M = system.M_W
    if not np.any(system.W > 0):
        raise ValueError("M_W is identically zero")
    x = np.ones(system.size)
    shift = 0.0
    shifted = False
    lam_prev = np.inf
    history: list = []
    normP = spla.norm(system.P, np.inf)
    eps = np.finfo(float).eps
    lam = np.nan
    for it in range(1, max_iter + 1):
        Mx = M @ x
        y = system.solve(Mx, shift)
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0:
            raise EigenSolverError("iteration broke down", history)
        x = y / nrm
        if x.sum() < 0:
            x = -x
        Mx = M @ x
        if system.symmetric:
            lam = _rayleigh(system, x, Mx)
        else:
            lam = _ratio_estimate(system, x, Mx)
        r = system.P @ x - lam * Mx
        mnorm = np.linalg.norm(Mx)
        res = float(np.linalg.norm(r) / mnorm)
        history.append(res)
        floor = 64 * eps * normP * np.linalg.norm(x) / mnorm
        if res <= max(tol, floor):
            xm = x.max()
            positive = bool(np.all(x >= -1e-8 * xm))
            return EigResult(lam, x, res, it, positive, shift)
        if not shifted and abs(lam - lam_prev) <= 1e-3 * abs(lam):
            shift = shift_factor * lam
            shifted = True
        lam_prev = lam
    raise EigenSolverError(f"no convergence in {max_iter} iterations (estimate {lam})", history)


def _ratio_estimate(system: DiscreteSystem, x: np.ndarray, Mx: np.ndarray) -> float:
    # for a non-symmetric pencil use the Galerkin quotient against M x
    return float(Mx @ (system.P @ x)) / float(Mx @ Mx)


def hardy_form_value(system: DiscreteSystem, phi) -> float:
    """``phi^T P phi - phi^T M_W phi``: the discrete quadratic form of ``(P - W, B)``."""
    v = np.asarray(phi(system.points()) if callable(phi) else phi, dtype=float).reshape(-1)
    if v.shape != (system.size,):
        raise ValueError("test vector must have one entry per unknown node")
    return float(v @ (system.P @ v) - v @ (system.W * system.vol * v))


# --------------------------------------------------------------------------- maximum principle


@dataclass(frozen=True)
class MaxPrincipleReport:
    passed: bool
    min_entries: tuple
    shift: float
    message: str = ""


def max_principle_probe(system: DiscreteSystem, shift: float = 0.0, trials: int = 20, seed: int = 0) -> MaxPrincipleReport:
    """Solve ``(P - shift M_W) v = vol f`` for random ``f >= 0``; pass iff every ``v >= -1e-10 |v|_inf``."""
    rng = np.random.default_rng(seed)
    mins = []
    try:
        for _ in range(trials):
            f = rng.uniform(0.0, 1.0, system.size) * (rng.uniform(size=system.size) < 0.5)
            if not np.any(f):
                f[rng.integers(system.size)] = 1.0
            v = system.solve(system.vol * f, shift)
            scale = max(np.abs(v).max(), 1e-300)
            mins.append(float(v.min() / scale))
    except SingularSystemError as exc:
        return MaxPrincipleReport(False, tuple(mins), shift, f"singular system: {exc}")
    passed = all(m >= -1e-10 for m in mins)
    return MaxPrincipleReport(passed, tuple(mins), shift)


# --------------------------------------------------------------------------- Green functions


def discrete_green(system: DiscreteSystem, source, dirichlet_values: Optional[np.ndarray] = None, rtol: float = 1e-10) -> np.ndarray:
    """Solve ``P g = e_y`` (a unit point mass at node ``y``) with optional Dirichlet data.

    ``source`` is an unknown-node index or a point (the nearest node is used).
    Large symmetric systems go through conjugate gradients with a Jacobi
    preconditioner; the rest through sparse LU.
    """
    if np.ndim(source) == 0:
        iy = int(source)
    else:
        pts = system.points()
        iy = int(np.argmin(np.linalg.norm(pts - np.asarray(source, float), axis=1)))
    rhs = np.zeros(system.size)
    rhs[iy] = 1.0
    if dirichlet_values is not None:
        rhs -= system.boundary_coupling @ np.asarray(dirichlet_values, float)
    if system.symmetric and system.size > 10_000:
        d = system.P.diagonal()
        if np.any(d <= 0):
            raise SingularSystemError("non-positive diagonal")
        pre = sp.diags(1.0 / d)
        g, info = spla.cg(system.P, rhs, rtol=rtol, atol=0.0, maxiter=20_000, M=pre)
        if info != 0:
            raise SingularSystemError(f"conjugate gradients did not converge (info={info})")
        return g
    return system.solve(rhs)
