"""Cone programs with duality certificates.

Programs are in the form

    maximise   <C, X>
    subject to b - phi(X) in K1*,   X in K2

with dual

    minimise   <b, y>
    subject to phi*(y) - C in K2*,  y in K1.

Two solution paths are available.  When every cone is polyhedral the
program and its dual are solved as linear programs through lifted cone
descriptions.  Otherwise a homogeneous self-dual embedding is solved by
operator splitting, using only Euclidean projections onto ``K1`` and ``K2*``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linprog

from ._lift import lp_blocks
from .cone_geometry import Cone, Orthant, PolyhedralH, PolyhedralV, Product
from .errors import ConeError, DimensionError, SolverError

log = logging.getLogger(__name__)

OPTIMAL = "Optimal"
PRIMAL_INFEASIBLE = "PrimalInfeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"


class LinearOperator:
    """Dense real matrix with its adjoint (the transpose)."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2:
            raise DimensionError("operator matrix must be two-dimensional")
        self.matrix = m

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def adjoint(self, y):
        return self.matrix.T @ np.asarray(y, dtype=float)

    def __repr__(self):
        return f"LinearOperator({self.shape[0]}x{self.shape[1]})"


@dataclass(frozen=True)
class ConicProgram:
    C: np.ndarray
    b: np.ndarray
    phi: LinearOperator
    K1: Cone
    K2: Cone

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        phi = self.phi if isinstance(self.phi, LinearOperator) else LinearOperator(self.phi)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phi", phi)
        m, n = phi.shape
        if C.shape[0] != n or self.K2.dim != n:
            raise DimensionError(
                f"objective ({C.shape[0]}), operator input ({n}) and K2 ({self.K2.dim}) must agree")
        if b.shape[0] != m or self.K1.dim != m:
            raise DimensionError(
                f"b ({b.shape[0]}), operator output ({m}) and K1 ({self.K1.dim}) must agree")

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[0]

    @property
    def is_polyhedral(self) -> bool:
        return self.K1.is_polyhedral and self.K2.is_polyhedral


@dataclass(frozen=True)
class SolverConfig:
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iter: int = 200_000
    scaling: bool = True
    seed: int = 0
    method: str = "auto"  # "auto", "lp" or "splitting"
    relaxation: float = 1.5
    eps_infeas: float = 1e-7
    check_every: int = 20

    def __post_init__(self):
        if self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("eps_abs and eps_rel must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.method not in ("auto", "lp", "splitting"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def tolerance(self) -> float:
        """Nominal gap tolerance for a unit-scale optimum."""
        return self.eps_abs + 2 * self.eps_rel


@dataclass(frozen=True)
class Solution:
    X: np.ndarray
    y: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    status: str
    iterations: int
    residuals: dict = field(default_factory=dict)
    method: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


# ---------------------------------------------------------------------------
# dispatch


def solve(p: ConicProgram, cfg: Optional[SolverConfig] = None) -> Solution:
    cfg = cfg or SolverConfig()
    method = cfg.method
    if method == "auto":
        method = "lp" if p.is_polyhedral else "splitting"
    if method == "lp":
        if not p.is_polyhedral:
            raise SolverError("the LP path needs polyhedral cones")
        return _solve_lp(p)
    return _solve_splitting(p, cfg)


# ---------------------------------------------------------------------------
# LP path


_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _linprog(c, A_ub, b_ub, A_eq, b_eq, bounds):
    kw = {}
    if A_ub.shape[0]:
        kw.update(A_ub=A_ub, b_ub=b_ub)
    if A_eq.shape[0]:
        kw.update(A_eq=A_eq, b_eq=b_eq)
    return linprog(c, bounds=bounds, method="highs", options=_HIGHS, **kw)


def _assemble(n_main: int, constraints):
    """Stack lifted-cone constraints on affine images of the main variable.

    ``constraints`` is a list of (lift, map, const) with ``map`` acting on the
    first ``n_main`` LP columns.  Returns LP matrices and bounds.
    """
    n_vars = n_main + sum(L.nw + L.nf for L, _, _ in constraints)
    bounds = [(None, None)] * n_main
    blocks = []
    offset = n_main
    for L, M, c0 in constraints:
        full = np.zeros((M.shape[0], n_vars))
        full[:, :n_main] = M
        blocks.append(lp_blocks(L, full, c0, n_vars, offset))
        bounds += [(0, None)] * L.nw + [(None, None)] * L.nf
        offset += L.nw + L.nf
    A_ub = np.vstack([b[0] for b in blocks]) if blocks else np.zeros((0, n_vars))
    b_ub = np.concatenate([b[1] for b in blocks]) if blocks else np.zeros(0)
    A_eq = np.vstack([b[2] for b in blocks]) if blocks else np.zeros((0, n_vars))
    b_eq = np.concatenate([b[3] for b in blocks]) if blocks else np.zeros(0)
    return n_vars, A_ub, b_ub, A_eq, b_eq, bounds


def _primal_lp(p: ConicProgram, C: np.ndarray, extra_rows=None):
    n = p.n
    Phi = p.phi.matrix
    cons = [
        (p.K2.lift(), np.eye(n), np.zeros(n)),
        (p.K1.dual().lift(), -Phi, p.b),
    ]
    n_vars, A_ub, b_ub, A_eq, b_eq, bounds = _assemble(n, cons)
    if extra_rows is not None:
        row, rhs = extra_rows
        full = np.zeros((1, n_vars))
        full[0, :n] = row
        A_ub = np.vstack([A_ub, full])
        b_ub = np.append(b_ub, rhs)
    c = np.zeros(n_vars)
    c[:n] = -C
    return _linprog(c, A_ub, b_ub, A_eq, b_eq, bounds)


def _dual_lp(p: ConicProgram, C: np.ndarray, b: np.ndarray, extra_rows=None):
    m = p.m
    Phi = p.phi.matrix
    cons = [
        (p.K1.lift(), np.eye(m), np.zeros(m)),
        (p.K2.dual().lift(), Phi.T, -C),
    ]
    n_vars, A_ub, b_ub, A_eq, b_eq, bounds = _assemble(m, cons)
    if extra_rows is not None:
        row, rhs = extra_rows
        full = np.zeros((1, n_vars))
        full[0, :m] = row
        A_ub = np.vstack([A_ub, full])
        b_ub = np.append(b_ub, rhs)
    c = np.zeros(n_vars)
    c[:m] = b
    return _linprog(c, A_ub, b_ub, A_eq, b_eq, bounds)


def _solve_lp(p: ConicProgram) -> Solution:
    n, m = p.n, p.m
    try:
        res = _primal_lp(p, p.C)
    except ConeError as exc:
        raise SolverError(f"cannot build LP: {exc}") from exc
    if res.status == 2:
        # Farkas ray: y in K1, phi*(y) in K2*, <b, y> = -1
        cert = _dual_lp(p, np.zeros(n), p.b, extra_rows=(-p.b, 1.0))
        y = cert.x[:m] if cert.status == 0 else np.zeros(m)
        return Solution(np.zeros(n), y, -math.inf, -math.inf, math.inf, PRIMAL_INFEASIBLE,
                        int(getattr(res, "nit", 0)), {}, "lp")
    if res.status == 3:
        ray = _primal_lp(replace(p, b=np.zeros(m)), p.C, extra_rows=(p.C, 1.0))
        X = ray.x[:n] if ray.status == 0 else np.zeros(n)
        return Solution(X, np.zeros(m), math.inf, math.inf, math.inf, UNBOUNDED,
                        int(getattr(res, "nit", 0)), {}, "lp")
    if res.status != 0:
        raise SolverError(f"primal LP failed: {res.message}")
    dres = _dual_lp(p, p.C, p.b)
    if dres.status != 0:
        raise SolverError(f"dual LP failed although the primal is optimal: {dres.message}")
    X = res.x[:n]
    y = dres.x[:m]
    pv = float(p.C @ X)
    dv = float(p.b @ y)
    return Solution(X, y, pv, dv, abs(pv - dv), OPTIMAL,
                    int(getattr(res, "nit", 0)) + int(getattr(dres, "nit", 0)), {}, "lp")


# ---------------------------------------------------------------------------
# splitting path (homogeneous self-dual embedding)


def _blocks(cone: Cone, start: int = 0):
    """(start, stop, separable) blocks; scaling may differ entrywise only on separable ones."""
    if isinstance(cone, Product):
        out = []
        for part in cone.parts:
            out += _blocks(part, start)
            start += part.dim
        return out
    separable = isinstance(cone, Orthant) or (
        isinstance(cone, PolyhedralV) and cone.gens.shape[0] == 0) or (
        isinstance(cone, PolyhedralH) and cone.normals.shape[0] == 0)
    return [(start, start + cone.dim, separable)]


def _blockwise(values: np.ndarray, blocks) -> np.ndarray:
    out = values.copy()
    for a, z, sep in blocks:
        if not sep and z > a:
            out[a:z] = np.exp(np.mean(np.log(values[a:z])))
    return out


def _ruiz(Phi: np.ndarray, row_blocks, col_blocks, iters: int = 25):
    m, n = Phi.shape
    D = np.ones(m)
    E = np.ones(n)
    for _ in range(iters):
        S = D[:, None] * Phi * E[None, :]
        r = np.abs(S).max(axis=1) if n else np.zeros(m)
        # the -I block of the embedding contributes 1 to every column
        c = np.maximum(np.abs(S).max(axis=0) if m else np.zeros(n), 1.0)
        r = np.where(r > 1e-12, r, 1.0)
        D = np.clip(D / np.sqrt(_blockwise(r, row_blocks)), 1e-4, 1e4)
        E = np.clip(E / np.sqrt(_blockwise(c, col_blocks)), 1e-4, 1e4)
    return D, E


class _KKT:
    """Solves (I + Q) w = z for the embedding with A = [Phi; -I]."""

    def __init__(self, Phi: np.ndarray, c: np.ndarray, b: np.ndarray):
        # b is the full right-hand side [b_phi; 0] of length m + n
        self.Phi = Phi
        m, n = Phi.shape
        self.m, self.n = m, n
        if m >= n:
            self._mode = "full"
            self._f = cho_factor(2.0 * np.eye(n) + Phi.T @ Phi)
        else:
            self._mode = "woodbury"
            self._f = cho_factor(2.0 * np.eye(m) + Phi @ Phi.T) if m else None
        self.h = np.concatenate([c, b])
        self.g = self._solve_m(self.h)
        self.hg = 1.0 + float(self.h @ self.g)

    def _inv(self, r: np.ndarray) -> np.ndarray:
        # (2I + Phi' Phi)^{-1} r
        if self._mode == "full":
            return cho_solve(self._f, r)
        if self.m == 0:
            return 0.5 * r
        return 0.5 * (r - self.Phi.T @ cho_solve(self._f, self.Phi @ r))

    def A(self, x):
        return np.concatenate([self.Phi @ x, -x])

    def AT(self, y):
        return self.Phi.T @ y[:self.m] - y[self.m:]

    def _solve_m(self, z: np.ndarray) -> np.ndarray:
        n = self.n
        zx, zy = z[:n], z[n:]
        wx = self._inv(zx - self.AT(zy))
        wy = zy + self.A(wx)
        return np.concatenate([wx, wy])

    def solve(self, z: np.ndarray) -> np.ndarray:
        zxy, zt = z[:-1], z[-1]
        mz = self._solve_m(zxy)
        wt = (zt + float(self.h @ mz)) / self.hg
        return np.concatenate([mz - self.g * wt, [wt]])


def _solve_splitting(p: ConicProgram, cfg: SolverConfig) -> Solution:
    n, m = p.n, p.m
    Phi = p.phi.matrix
    K1, K2d = p.K1, p.K2.dual()
    # scaling: rows of Phi by D (block scalar on non-orthant cones), columns by E
    if cfg.scaling:
        D, E = _ruiz(Phi, _blocks(p.K1.dual()), _blocks(p.K2))
    else:
        D, E = np.ones(m), np.ones(n)
    Phis = D[:, None] * Phi * E[None, :]
    bs = np.concatenate([D * p.b, np.zeros(n)])
    cs = -E * p.C
    nb, nc = np.linalg.norm(bs), np.linalg.norm(cs)
    sigma = 1.0 / nb if nb > 1e-12 else 1.0
    rho = 1.0 / nc if nc > 1e-12 else 1.0
    bs *= sigma
    cs *= rho
    kkt = _KKT(Phis, cs, bs)

    N = n + m + n + 1
    u = np.zeros(N)
    v = np.zeros(N)
    u[-1] = v[-1] = 1.0
    alpha = cfg.relaxation
    ys_slice = slice(n, n + m + n)

    def project_u(w):
        out = w.copy()
        y = w[ys_slice]
        # scaled dual variable: yhat = y_orig / (D, 1/E) up to rho; cones unchanged by block scalars
        out[n:n + m] = K1.project(y[:m])
        out[n + m:n + m + n] = K2d.project(y[m:])
        out[-1] = max(w[-1], 0.0)
        return out

    def unscale(u, v, tau):
        x = E * u[:n] / tau / sigma
        y1 = D * u[n:n + m] / tau / rho
        y2 = u[n + m:n + m + n] / E / tau / rho
        s1 = v[n:n + m] / D / tau / sigma
        s2 = v[n + m:n + m + n] * E / tau / sigma
        return x, y1, y2, s1, s2

    status = ITERATION_LIMIT
    resid = {}
    k = 0
    for k in range(1, cfg.max_iter + 1):
        ut = kkt.solve(u + v)
        ut = alpha * ut + (1.0 - alpha) * u
        u_new = project_u(ut - v)
        v = v - ut + u_new
        u = u_new
        if k % cfg.check_every and k != cfg.max_iter:
            continue
        tau, kappa = u[-1], v[-1]
        if tau > 1e-12:
            x, y1, y2, s1, s2 = unscale(u, v, tau)
            pv = float(p.C @ x)
            dv = float(p.b @ y1)
            pres = math.sqrt(float(np.sum((Phi @ x + s1 - p.b) ** 2) + np.sum((s2 - x) ** 2)))
            dres = float(np.linalg.norm(Phi.T @ y1 - y2 - p.C))
            gap = abs(pv - dv)
            thr = cfg.eps_abs + cfg.eps_rel * (1.0 + abs(pv))
            resid = {"primal": pres, "dual": dres, "gap": gap}
            if pres <= thr and dres <= thr and gap <= thr:
                status = OPTIMAL
                break
        # certificates of infeasibility / unboundedness (orig scaling, direction only)
        y1d = D * u[n:n + m]
        y2d = u[n + m:n + m + n] / E
        by = float(p.b @ y1d)
        if by < 0:
            yn1, yn2 = y1d / -by, y2d / -by
            if np.linalg.norm(Phi.T @ yn1 - yn2) <= cfg.eps_infeas:
                status = PRIMAL_INFEASIBLE
                break
        xd = E * u[:n]
        cx = float(p.C @ xd)
        if cx > 0:
            xn = xd / cx
            # a ray has phi(x) in -K1* and x in K2
            if (tau <= cfg.eps_infeas * max(1.0, kappa)
                    and p.K2.distance(xn) <= cfg.eps_infeas
                    and p.K1.dual().distance(-Phi @ xn) <= cfg.eps_infeas):
                status = UNBOUNDED
                break

    if status == OPTIMAL:
        x, y1, *_ = unscale(u, v, u[-1])
        pv, dv = float(p.C @ x), float(p.b @ y1)
        return Solution(x, y1, pv, dv, abs(pv - dv), OPTIMAL, k, resid, "splitting")
    if status == PRIMAL_INFEASIBLE:
        y1d = D * u[n:n + m]
        y = y1d / -float(p.b @ y1d)
        return Solution(np.zeros(n), y, -math.inf, -math.inf, math.inf, status, k, resid, "splitting")
    if status == UNBOUNDED:
        xd = E * u[:n]
        return Solution(xd / float(p.C @ xd), np.zeros(m), math.inf, math.inf, math.inf, status, k,
                        resid, "splitting")
    tau = max(u[-1], 1e-300)
    x, y1, *_ = unscale(u, v, tau)
    pv, dv = float(p.C @ x), float(p.b @ y1)
    log.warning("splitting solver hit the iteration limit (%d): %s", k, resid)
    return Solution(x, y1, pv, dv, abs(pv - dv), ITERATION_LIMIT, k, resid, "splitting")


# ---------------------------------------------------------------------------
# verification


def verify_solution(p: ConicProgram, s: Solution, tol: float = 1e-6) -> bool:
    """Re-check a solution against the program, independently of the solver loop."""
    X = np.asarray(s.X, dtype=float).reshape(-1)
    y = np.asarray(s.y, dtype=float).reshape(-1)
    if X.shape[0] != p.n or y.shape[0] != p.m:
        raise DimensionError("solution does not match program dimensions")
    K1s, K2s = p.K1.dual(), p.K2.dual()
    if s.status == OPTIMAL:
        pv = float(p.C @ X)
        dv = float(p.b @ y)
        scale = 1.0 + abs(pv)
        checks = [
            p.K2.distance(X) <= tol,
            K1s.distance(p.b - p.phi(X)) <= tol,
            p.K1.distance(y) <= tol,
            K2s.distance(p.phi.adjoint(y) - p.C) <= tol,
            abs(pv - s.primal_value) <= tol * scale,
            abs(dv - s.dual_value) <= tol * scale,
            abs(pv - dv) <= tol * scale,
            pv <= dv + tol * scale,
        ]
        return all(checks)
    if s.status == PRIMAL_INFEASIBLE:
        by = float(p.b @ y)
        if by >= -tol:
            return False
        yn = y / -by
        return p.K1.distance(yn) <= tol and K2s.distance(p.phi.adjoint(yn)) <= tol
    if s.status == UNBOUNDED:
        cx = float(p.C @ X)
        if cx <= tol:
            return False
        xn = X / cx
        return p.K2.distance(xn) <= tol and K1s.distance(-p.phi(xn)) <= tol
    return False


# ---------------------------------------------------------------------------
# Slater conditions


@dataclass(frozen=True)
class SlaterReport:
    primal_strict: bool
    dual_strict: bool
    primal_witness: Optional[np.ndarray]
    dual_witness: Optional[np.ndarray]


def _margin(cone: Cone, x) -> float:
    try:
        return cone.interior_margin(x)
    except ConeError:
        return -math.inf


def check_slater(p: ConicProgram, margin: float = 1e-6, primal_candidate=None,
                 dual_candidate=None, max_doublings: int = 40) -> SlaterReport:
    """Look for strictly feasible primal and dual points by rescaling interior candidates.

    The primal candidate is shrunk towards zero until ``b - phi(X)`` is strictly
    inside ``K1*``; the dual candidate is scaled up until ``phi*(y) - C`` is
    strictly inside ``K2*``.  A missing witness is a negative report, never an
    error.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    K1s, K2s = p.K1.dual(), p.K2.dual()

    primal = None
    try:
        X0 = p.K2.interior_point() if primal_candidate is None else np.asarray(primal_candidate, float)
    except ConeError:
        X0 = None
    if X0 is not None:
        lam = 1.0
        for _ in range(max_doublings):
            X = lam * X0
            if _margin(p.K2, X) >= margin and _margin(K1s, p.b - p.phi(X)) >= margin:
                primal = X
                break
            lam *= 0.5

    dual = None
    try:
        y0 = p.K1.interior_point() if dual_candidate is None else np.asarray(dual_candidate, float)
    except ConeError:
        y0 = None
    if y0 is not None:
        lam = 1.0
        for _ in range(max_doublings):
            y = lam * y0
            if _margin(p.K1, y) >= margin and _margin(K2s, p.phi.adjoint(y) - p.C) >= margin:
                dual = y
                break
            lam *= 2.0
    return SlaterReport(primal is not None, dual is not None, primal, dual)


# ---------------------------------------------------------------------------
# brute-force oracle


def _h_rep(cone: Cone) -> np.ndarray:
    """Normals (rows) of an inequality description of a polyhedral cone."""
    try:
        return cone.dual()._rays()
    except ConeError as exc:
        raise SolverError(f"brute force needs an inequality description of {cone!r}") from exc


def brute_force_polyhedral(p: ConicProgram, max_dim: int = 8, tol: float = 1e-9) -> float:
    """Optimal value by enumerating vertices and extreme rays of the feasible region.

    Returns ``-inf`` for an infeasible and ``+inf`` for an unbounded program.
    Only intended for tiny instances; it assumes the feasible region has a
    vertex whenever it is non-empty and bounded in the objective direction.
    """
    if not p.is_polyhedral:
        raise SolverError("brute force needs polyhedral cones")
    n = p.n
    if n + p.m > max_dim:
        raise SolverError(f"total dimension {n + p.m} exceeds the brute-force cap {max_dim}")
    N2 = _h_rep(p.K2)                      # N2 X >= 0
    N1 = _h_rep(p.K1.dual())               # N1 (b - Phi X) >= 0
    Phi = p.phi.matrix
    # region {X : A X <= r}
    A = np.vstack([-N2, N1 @ Phi]) if N1.shape[0] else -N2
    r = np.concatenate([np.zeros(N2.shape[0]), N1 @ p.b]) if N1.shape[0] else np.zeros(N2.shape[0])
    if A.shape[0] == 0:
        return math.inf if np.linalg.norm(p.C) > tol else 0.0
    scale = np.linalg.norm(A, axis=1)
    scale[scale == 0] = 1.0
    A = A / scale[:, None]
    r = r / scale

    best = -math.inf
    for S in itertools.combinations(range(A.shape[0]), n):
        AS = A[list(S)]
        if abs(np.linalg.det(AS)) < 1e-10:
            continue
        X = np.linalg.solve(AS, r[list(S)])
        if np.all(A @ X <= r + 1e-9 * (1 + np.abs(r))):
            best = max(best, float(p.C @ X))
    if best == -math.inf:
        # no vertex: either infeasible or a region without vertices
        if np.all(r >= -tol) and np.linalg.matrix_rank(A) == n:
            return -math.inf
        if np.linalg.matrix_rank(A) < n:
            raise SolverError("feasible region has a lineality space; brute force needs a vertex")
        return -math.inf
    # improving extreme rays of the recession cone {d : A d <= 0}
    for S in itertools.combinations(range(A.shape[0]), n - 1):
        AS = A[list(S)]
        if n - 1 > 0:
            _, sv, vt = np.linalg.svd(AS)
            if int((sv > 1e-10).sum()) != n - 1:
                continue
            d = vt[-1]
        else:
            d = np.ones(1)
        for sgn in (1.0, -1.0):
            dd = sgn * d
            if np.all(A @ dd <= 1e-9) and float(p.C @ dd) > tol:
                return math.inf
    return best
