"""Closed convex cones in finite-dimensional real inner-product spaces.

Every cone lives in ``R^n`` with the standard Euclidean inner product.  The
PSD cone of Hermitian matrices is embedded through an orthonormal Hermitian
basis, so vector inner products equal trace inner products and the cone is
self-dual in these coordinates.

Variants: :class:`Orthant`, :class:`PsdHermitian`, :class:`PolyhedralV`
(conic hull of generators), :class:`PolyhedralH` (intersection of
half-spaces ``<a, x> >= 0``), :class:`Product`, :class:`TensorMin`,
:class:`TensorMax` and :class:`DualOf`.

Tensor composites are only supported for polyhedral factors, which keeps
every composite closed.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.optimize import linprog, lsq_linear, nnls

from ._lift import Lift, lp_blocks
from .errors import ConeError, DimensionError

DEFAULT_TOL = 1e-7

__all__ = [
    "Cone", "Orthant", "PsdHermitian", "PolyhedralV", "PolyhedralH", "Product",
    "TensorMin", "TensorMax", "DualOf", "Intersection", "hermitian_basis", "contains",
    "strictly_contains", "dual", "project", "cone_dim", "generators",
    "interior_margin", "zero_cone", "free_cone", "DEFAULT_TOL",
]


def _as_vec(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionError(f"vector has length {x.shape[0]}, cone lives in R^{n}")
    return x


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return a / norms


class Cone:
    """Base class. Subclasses are immutable after construction."""

    dim: int

    # membership ---------------------------------------------------------

    def distance(self, x) -> float:
        """Euclidean distance from ``x`` to the cone."""
        x = _as_vec(x, self.dim)
        try:
            return float(np.linalg.norm(x - self.project(x)))
        except ConeError:
            return self._lp_distance(x)

    def contains(self, x, tol: float = DEFAULT_TOL) -> bool:
        if tol < 0:
            raise ValueError("tol must be non-negative")
        return self.distance(x) <= tol

    def interior_margin(self, x) -> float:
        """Clearance of ``x`` from the boundary; positive iff interior.

        The scale of the clearance is variant specific but always absolute
        (it scales linearly with ``x``).
        """
        raise ConeError(f"strict interior test unsupported for {type(self).__name__}")

    def strictly_contains(self, x, margin: float) -> bool:
        if margin <= 0:
            raise ValueError("margin must be positive")
        return self.interior_margin(_as_vec(x, self.dim)) >= margin

    # geometry -----------------------------------------------------------

    def dual(self) -> "Cone":
        return DualOf(self)

    def project(self, x) -> np.ndarray:
        raise ConeError(f"projection unsupported for {type(self).__name__}")

    def generators(self) -> np.ndarray:
        """Finite set (rows) whose conic hull lies in the cone and spans its span."""
        raise ConeError(
            f"generators unsupported for {type(self).__name__}; dualise first"
        )

    def interior_point(self) -> np.ndarray:
        return self._rays().sum(axis=0)

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Random members of the cone, one per row."""
        gens = self._rays()
        weights = rng.exponential(size=(size, gens.shape[0]))
        return weights @ gens

    # polyhedral machinery -----------------------------------------------

    @property
    def is_polyhedral(self) -> bool:
        return True

    def lift(self) -> Lift:
        raise ConeError(f"{type(self).__name__} has no polyhedral description")

    def _rays(self) -> np.ndarray:
        """Generators, enumerating extreme rays for small H-described cones."""
        return self.generators()

    def _lp_distance(self, x: np.ndarray) -> float:
        """Infinity-norm distance through the lifted description."""
        L = self.lift()
        n = self.dim
        # variables: z (n), aux (nw + nf), t
        nv = n + L.nw + L.nf + 1
        A_ub, b_ub, A_eq, b_eq = lp_blocks(
            L, np.hstack([np.eye(n), np.zeros((n, nv - n))]), np.zeros(n), nv, n)
        t_col = np.zeros((n, nv))
        t_col[:, -1] = -1.0
        zx = np.hstack([np.eye(n), np.zeros((n, nv - n))])
        A_ub = np.vstack([A_ub, zx + t_col, -zx + t_col])
        b_ub = np.concatenate([b_ub, x, -x])
        bounds = [(None, None)] * n + [(0, None)] * L.nw + [(None, None)] * L.nf + [(0, None)]
        c = np.zeros(nv)
        c[-1] = 1.0
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if A_eq.size else None,
                      b_eq=b_eq if A_eq.size else None, bounds=bounds, method="highs")
        if res.status != 0:
            raise ConeError(f"membership LP failed: {res.message}")
        return float(res.fun)

    def _check(self, other_dim: int) -> None:
        if other_dim != self.dim:
            raise DimensionError(f"dimension {other_dim} does not match cone dimension {self.dim}")


# ---------------------------------------------------------------------------
# orthant


class Orthant(Cone):
    def __init__(self, n: int):
        if n < 0:
            raise ValueError("dimension must be non-negative")
        self.dim = int(n)

    def __repr__(self):
        return f"Orthant({self.dim})"

    def __eq__(self, other):
        return isinstance(other, Orthant) and other.dim == self.dim

    def __hash__(self):
        return hash(("Orthant", self.dim))

    def distance(self, x) -> float:
        x = _as_vec(x, self.dim)
        return float(np.linalg.norm(np.minimum(x, 0.0)))

    def interior_margin(self, x) -> float:
        x = _as_vec(x, self.dim)
        return float(x.min()) if self.dim else np.inf

    def dual(self) -> Cone:
        return self

    def project(self, x) -> np.ndarray:
        return np.maximum(_as_vec(x, self.dim), 0.0)

    def generators(self) -> np.ndarray:
        return np.eye(self.dim)

    def interior_point(self) -> np.ndarray:
        return np.ones(self.dim)

    def lift(self) -> Lift:
        return Lift.from_inequalities(np.eye(self.dim))


# ---------------------------------------------------------------------------
# PSD cone of Hermitian matrices


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d x d Hermitian matrices, shape (d*d, d, d).

    Order: diagonal units E_jj, then for each j < k the pair
    (E_jk + E_kj)/sqrt(2) and i(E_jk - E_kj)/sqrt(2).
    """
    basis = []
    for j in range(d):
        m = np.zeros((d, d), dtype=complex)
        m[j, j] = 1.0
        basis.append(m)
    r = 1.0 / np.sqrt(2.0)
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = r
            basis.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = 1j * r
            m[k, j] = -1j * r
            basis.append(m)
    return np.array(basis)


class PsdHermitian(Cone):
    """PSD Hermitian matrices of size ``prod(factors)`` as real vectors.

    Coordinates are taken in the tensor-product basis of the per-factor
    bases from :func:`hermitian_basis`.  A factor flagged in ``transposed``
    uses the transposed (complex-conjugated) basis instead, which is how Choi
    operators of channels are represented.
    """

    def __init__(self, d: int | None = None, factors: Sequence[int] | None = None,
                 transposed: Sequence[bool] | None = None):
        if factors is None:
            if d is None:
                raise ValueError("give d or factors")
            factors = (int(d),)
        self.factors = tuple(int(f) for f in factors)
        if any(f < 1 for f in self.factors):
            raise ValueError("factor dimensions must be positive")
        if transposed is None:
            transposed = (False,) * len(self.factors)
        self.transposed = tuple(bool(t) for t in transposed)
        if len(self.transposed) != len(self.factors):
            raise ValueError("one transposed flag per factor")
        self.d = int(np.prod(self.factors))
        if d is not None and int(d) != self.d:
            raise ValueError("d does not match the product of factors")
        self.dim = self.d * self.d

    def __repr__(self):
        if len(self.factors) == 1 and not self.transposed[0]:
            return f"PsdHermitian({self.d})"
        return f"PsdHermitian(factors={self.factors}, transposed={self.transposed})"

    def __eq__(self, other):
        return (isinstance(other, PsdHermitian) and other.factors == self.factors
                and other.transposed == self.transposed)

    def __hash__(self):
        return hash(("Psd", self.factors, self.transposed))

    @cached_property
    def _unitaries(self):
        mats = []
        for f, t in zip(self.factors, self.transposed):
            b = hermitian_basis(f)
            if t:
                b = np.transpose(b, (0, 2, 1))
            # U[(a, b), k] = basis_k[a, b]
            mats.append(b.reshape(f * f, f * f).T.copy())
        return mats

    def to_matrix(self, x) -> np.ndarray:
        x = _as_vec(x, self.dim)
        m = len(self.factors)
        t = x.reshape([f * f for f in self.factors]).astype(complex)
        for axis, U in enumerate(self._unitaries):
            t = np.moveaxis(np.tensordot(U, t, axes=([1], [axis])), 0, axis)
        t = t.reshape([g for f in self.factors for g in (f, f)])
        perm = list(range(0, 2 * m, 2)) + list(range(1, 2 * m, 2))
        return t.transpose(perm).reshape(self.d, self.d)

    def from_matrix(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=complex)
        if M.shape != (self.d, self.d):
            raise DimensionError(f"expected a {self.d}x{self.d} matrix")
        m = len(self.factors)
        t = M.reshape(self.factors + self.factors)
        perm = [p for i in range(m) for p in (i, m + i)]
        t = t.transpose(perm).reshape([f * f for f in self.factors])
        for axis, U in enumerate(self._unitaries):
            t = np.moveaxis(np.tensordot(U.conj().T, t, axes=([1], [axis])), 0, axis)
        return np.real(t).reshape(-1)

    def _eigh(self, x):
        M = self.to_matrix(x)
        M = 0.5 * (M + M.conj().T)
        return np.linalg.eigh(M)

    def distance(self, x) -> float:
        w, _ = self._eigh(x)
        return float(np.linalg.norm(np.minimum(w, 0.0)))

    def interior_margin(self, x) -> float:
        w, _ = self._eigh(x)
        return float(w[0])

    def dual(self) -> Cone:
        return self

    def project(self, x) -> np.ndarray:
        w, v = self._eigh(x)
        w = np.maximum(w, 0.0)
        return self.from_matrix((v * w) @ v.conj().T)

    def generators(self) -> np.ndarray:
        """Rank-one elements built from computational basis vectors.

        They span the Hermitian space but do not include every extreme ray.
        """
        d = self.d
        vecs = []
        for j in range(d):
            e = np.zeros(d, dtype=complex)
            e[j] = 1.0
            vecs.append(e)
        r = 1.0 / np.sqrt(2.0)
        for j in range(d):
            for k in range(j + 1, d):
                for phase in (1.0, 1j):
                    e = np.zeros(d, dtype=complex)
                    e[j] = r
                    e[k] = phase * r
                    vecs.append(e)
        return np.array([self.from_matrix(np.outer(v, v.conj())) for v in vecs])

    def interior_point(self) -> np.ndarray:
        return self.from_matrix(np.eye(self.d))

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        out = []
        for _ in range(size):
            g = rng.normal(size=(self.d, self.d)) + 1j * rng.normal(size=(self.d, self.d))
            out.append(self.from_matrix(g @ g.conj().T))
        return np.array(out)

    @property
    def is_polyhedral(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# polyhedral cones


def _enumerate_rays(normals: np.ndarray, n: int, max_subsets: int = 200_000) -> np.ndarray:
    """Extreme rays (plus lineality generators) of {x : normals x >= 0}.

    Brute force over active sets, so only meant for small dimensions.
    """
    N = np.asarray(normals, dtype=float).reshape(-1, n)
    if N.shape[0] == 0:
        eye = np.eye(n)
        return np.vstack([eye, -eye])
    # lineality space
    _, s, vt = np.linalg.svd(N)
    rank = int((s > 1e-10 * max(1.0, s[0])).sum())
    lin = vt[rank:]
    out = [lin, -lin] if lin.shape[0] else []
    if rank == 0:
        return np.vstack(out)
    if math.comb(N.shape[0], rank - 1) > max_subsets:
        raise ConeError("too many active sets for brute-force ray enumeration")
    Nu = _unit_rows(N)
    count = 0
    rays: list[np.ndarray] = []
    for S in itertools.combinations(range(N.shape[0]), rank - 1):
        count += 1
        if count > max_subsets:
            raise ConeError("too many active sets for brute-force ray enumeration")
        A = np.vstack([N[list(S)], lin]) if lin.shape[0] else N[list(S)]
        if A.shape[0] == 0:
            # rank 1: the cone is a half-space modulo lineality
            _, _, vt2 = np.linalg.svd(np.vstack([lin, np.zeros((1, n))]))
            cand = vt2[-1:]
        else:
            _, s2, vt2 = np.linalg.svd(A)
            r2 = int((s2 > 1e-10 * max(1.0, s2[0])).sum())
            if r2 != n - 1:
                continue
            cand = vt2[-1:]
        d = cand[0]
        for sign in (1.0, -1.0):
            v = sign * d
            if np.all(Nu @ v >= -1e-10):
                v = v / np.linalg.norm(v)
                if not any(np.linalg.norm(v - r) < 1e-8 for r in rays):
                    rays.append(v)
    if rays:
        out.append(np.array(rays))
    return np.vstack(out) if out else np.zeros((0, n))


class PolyhedralV(Cone):
    """Conic hull of finitely many generators (rows).

    With no generators this is the zero cone ``{0}``.
    """

    def __init__(self, generators, dim: int | None = None):
        g = np.asarray(generators, dtype=float)
        if g.size == 0:
            if dim is None:
                raise ValueError("dim is required for an empty generator list")
            g = np.zeros((0, int(dim)))
        g = np.atleast_2d(g)
        if dim is not None and g.shape[1] != dim:
            raise DimensionError("generator length does not match dim")
        self.gens = g
        self.dim = g.shape[1]

    def __repr__(self):
        return f"PolyhedralV({self.gens.shape[0]} generators in R^{self.dim})"

    def dual(self) -> Cone:
        return PolyhedralH(self.gens, dim=self.dim)

    def project(self, x) -> np.ndarray:
        x = _as_vec(x, self.dim)
        if self.gens.shape[0] == 0:
            return np.zeros(self.dim)
        return self.gens.T @ _nonneg_lstsq(self.gens.T, x)

    def generators(self) -> np.ndarray:
        return self.gens.copy()

    def interior_margin(self, x) -> float:
        """Largest t with x = sum lam_j g_j (unit generators), all lam_j >= t.

        Zero or negative when the generators do not span R^n.
        """
        x = _as_vec(x, self.dim)
        return _v_clearance(self.gens, x)

    def interior_point(self) -> np.ndarray:
        return _unit_rows(self.gens).sum(axis=0)

    def lift(self) -> Lift:
        return Lift.from_generators(self.gens, self.dim)


def _nonneg_lstsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """argmin ||A lam - b|| over lam >= 0, with a KKT check on the active-set answer.

    The active-set routine occasionally stops at a non-optimal point while
    reporting a small residual; bounded-variable least squares is the fallback.
    """
    scale = 1.0 + float(np.abs(b).max(initial=0.0)) * (1.0 + float(np.abs(A).max(initial=0.0)))
    try:
        lam, _ = nnls(A, b, maxiter=50 * max(A.shape))
        if _nnls_kkt_ok(A, b, lam, scale):
            return lam
    except RuntimeError:
        pass
    res = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls", tol=1e-15)
    lam = np.maximum(res.x, 0.0)
    if not _nnls_kkt_ok(A, b, lam, scale, 1e-9):
        raise ConeError("non-negative least squares projection did not converge")
    return lam


def _nnls_kkt_ok(A, b, lam, scale, tol=1e-11) -> bool:
    g = A.T @ (A @ lam - b)
    return bool(g.min(initial=0.0) >= -tol * scale and abs(float(g @ lam)) <= tol * scale)


def _v_clearance(gens: np.ndarray, x: np.ndarray) -> float:
    n = x.shape[0]
    if n == 0:
        return np.inf
    if gens.shape[0] == 0 or np.linalg.matrix_rank(gens) < n:
        return -np.inf
    G = _unit_rows(gens)
    k = G.shape[0]
    # maximise t s.t. G' lam = x, lam - t >= 0, t <= 1 + |x| (keeps LP bounded)
    c = np.zeros(k + 1)
    c[-1] = -1.0
    A_eq = np.hstack([G.T, np.zeros((n, 1))])
    A_ub = np.hstack([-np.eye(k), np.ones((k, 1))])
    b_ub = np.zeros(k)
    cap = 1.0 + float(np.abs(x).sum())
    bounds = [(None, None)] * k + [(None, cap)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=x, bounds=bounds, method="highs")
    if res.status == 2:
        return -np.inf
    if res.status != 0:
        raise ConeError(f"interior LP failed: {res.message}")
    return float(-res.fun)


class PolyhedralH(Cone):
    """``{x : <a_j, x> >= 0}`` for finitely many normals ``a_j`` (rows).

    With no normals this is the whole space.
    """

    def __init__(self, normals, dim: int | None = None):
        a = np.asarray(normals, dtype=float)
        if a.size == 0:
            if dim is None:
                raise ValueError("dim is required for an empty normal list")
            a = np.zeros((0, int(dim)))
        a = np.atleast_2d(a)
        if dim is not None and a.shape[1] != dim:
            raise DimensionError("normal length does not match dim")
        self.normals = a
        self.dim = a.shape[1]

    def __repr__(self):
        return f"PolyhedralH({self.normals.shape[0]} normals in R^{self.dim})"

    def dual(self) -> Cone:
        return PolyhedralV(self.normals, dim=self.dim)

    def project(self, x) -> np.ndarray:
        # Moreau: P_{K*}(x) = x + P_K(-x) with K the V-cone of the normals
        x = _as_vec(x, self.dim)
        return x + PolyhedralV(self.normals, dim=self.dim).project(-x)

    def interior_margin(self, x) -> float:
        x = _as_vec(x, self.dim)
        if self.normals.shape[0] == 0:
            return np.inf
        return float((_unit_rows(self.normals) @ x).min())

    def interior_point(self) -> np.ndarray:
        n = self.dim
        if self.normals.shape[0] == 0:
            return np.zeros(n)
        A = _unit_rows(self.normals)
        k = A.shape[0]
        # maximise t s.t. A x >= t, |x|_inf <= 1
        c = np.zeros(n + 1)
        c[-1] = -1.0
        res = linprog(c, A_ub=np.hstack([-A, np.ones((k, 1))]), b_ub=np.zeros(k),
                      bounds=[(-1, 1)] * n + [(None, 1)], method="highs")
        if res.status != 0:
            raise ConeError(f"interior LP failed: {res.message}")
        return res.x[:n]

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        return np.array([self.project(rng.normal(size=self.dim)) for _ in range(size)])

    def _rays(self) -> np.ndarray:
        if not hasattr(self, "_ray_cache"):
            self._ray_cache = _enumerate_rays(self.normals, self.dim)
        return self._ray_cache

    def lift(self) -> Lift:
        return Lift.from_inequalities(self.normals)


# ---------------------------------------------------------------------------
# products and tensor composites


class Product(Cone):
    def __init__(self, parts: Sequence[Cone]):
        self.parts = tuple(parts)
        self.dims = tuple(p.dim for p in self.parts)
        self.dim = int(sum(self.dims))
        self._offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    def __repr__(self):
        return f"Product({list(self.parts)!r})"

    def split(self, x) -> list[np.ndarray]:
        x = _as_vec(x, self.dim)
        o = self._offsets
        return [x[o[i]:o[i + 1]] for i in range(len(self.parts))]

    def distance(self, x) -> float:
        return float(np.sqrt(sum(p.distance(xi) ** 2 for p, xi in zip(self.parts, self.split(x)))))

    def interior_margin(self, x) -> float:
        return min((p.interior_margin(xi) for p, xi in zip(self.parts, self.split(x))), default=np.inf)

    def dual(self) -> Cone:
        return Product([p.dual() for p in self.parts])

    def project(self, x) -> np.ndarray:
        if not self.parts:
            return np.zeros(0)
        return np.concatenate([p.project(xi) for p, xi in zip(self.parts, self.split(x))])

    def _embed(self, blocks):
        rows = []
        for i, b in enumerate(blocks):
            full = np.zeros((b.shape[0], self.dim))
            full[:, self._offsets[i]:self._offsets[i + 1]] = b
            rows.append(full)
        return np.vstack(rows) if rows else np.zeros((0, self.dim))

    def generators(self) -> np.ndarray:
        return self._embed([p.generators() for p in self.parts])

    def _rays(self) -> np.ndarray:
        return self._embed([p._rays() for p in self.parts])

    def interior_point(self) -> np.ndarray:
        if not self.parts:
            return np.zeros(0)
        return np.concatenate([p.interior_point() for p in self.parts])

    def sample(self, rng, size=1):
        if not self.parts:
            return np.zeros((size, 0))
        return np.hstack([p.sample(rng, size) for p in self.parts])

    @property
    def is_polyhedral(self) -> bool:
        return all(p.is_polyhedral for p in self.parts)

    def lift(self) -> Lift:
        return Lift.product([p.lift() for p in self.parts])


def _try_rays(cone: Cone):
    try:
        return cone._rays()
    except ConeError:
        return None


def _contract_first(a: np.ndarray, q: int) -> np.ndarray:
    """Matrix of x -> (a^T (x) I_q) x."""
    return np.kron(a.reshape(1, -1), np.eye(q))


def _contract_second(b: np.ndarray, p: int) -> np.ndarray:
    return np.kron(np.eye(p), b.reshape(1, -1))


def _require_polyhedral(*cones: Cone) -> None:
    for c in cones:
        if not c.is_polyhedral:
            raise ConeError(f"{c!r} is not polyhedral; tensor composites and intersections need polyhedral cones")


class TensorMin(Cone):
    """Conic hull of ``p (x) q`` for ``p`` in the first and ``q`` in the second cone."""

    def __init__(self, first: Cone, second: Cone):
        _require_polyhedral(first, second)
        self.first, self.second = first, second
        self.dim = first.dim * second.dim

    def __repr__(self):
        return f"TensorMin({self.first!r}, {self.second!r})"

    @cached_property
    def _vrep(self) -> PolyhedralV | None:
        a, b = _try_rays(self.first), _try_rays(self.second)
        if a is None or b is None:
            return None
        gens = np.array([np.kron(g, h) for g in a for h in b]).reshape(-1, self.dim)
        return PolyhedralV(gens, dim=self.dim)

    def _need_vrep(self) -> PolyhedralV:
        if self._vrep is None:
            raise ConeError("TensorMin needs generators for both factors")
        return self._vrep

    def dual(self) -> Cone:
        return TensorMax(self.first.dual(), self.second.dual())

    def project(self, x) -> np.ndarray:
        return self._need_vrep().project(x)

    def distance(self, x) -> float:
        if self._vrep is not None:
            return self._vrep.distance(x)
        return self._lp_distance(_as_vec(x, self.dim))

    def interior_margin(self, x) -> float:
        return self._need_vrep().interior_margin(x)

    def generators(self) -> np.ndarray:
        a, b = self.first.generators(), self.second.generators()
        return np.array([np.kron(g, h) for g in a for h in b]).reshape(-1, self.dim)

    def _rays(self) -> np.ndarray:
        return self._need_vrep().gens

    def interior_point(self) -> np.ndarray:
        return np.kron(self.first.interior_point(), self.second.interior_point())

    def lift(self) -> Lift:
        if self._vrep is not None:
            return self._vrep.lift()
        p, q = self.first.dim, self.second.dim
        a = _try_rays(self.first)
        if a is not None:
            # x = sum_j g_j (x) q_j with q_j in the second cone
            M = np.hstack([np.kron(g.reshape(-1, 1), np.eye(q)) for g in a])
            return Lift.product([self.second.lift()] * a.shape[0]).image(M)
        b = _try_rays(self.second)
        if b is not None:
            M = np.hstack([np.kron(np.eye(p), h.reshape(-1, 1)) for h in b])
            return Lift.product([self.first.lift()] * b.shape[0]).image(M)
        raise ConeError("TensorMin needs generators for at least one factor")


_TENSOR_MAX_RAYS: dict = {}


class TensorMax(Cone):
    """Dual of the minimal tensor product of the duals.

    ``x`` is a member iff ``<x, a (x) b> >= 0`` for all ``a`` in the dual of
    the first and ``b`` in the dual of the second factor; membership is
    decided by contracting ``x`` with generators of one dual factor.
    """

    def __init__(self, first: Cone, second: Cone):
        _require_polyhedral(first, second)
        self.first, self.second = first, second
        self.dim = first.dim * second.dim

    def __repr__(self):
        return f"TensorMax({self.first!r}, {self.second!r})"

    @cached_property
    def _contractions(self):
        """(matrices, factor cone) with x in K iff every matrix maps x into factor cone."""
        p, q = self.first.dim, self.second.dim
        a = _try_rays(self.first.dual())
        if a is not None:
            return [_contract_first(g, q) for g in _unit_rows(a)], self.second
        b = _try_rays(self.second.dual())
        if b is not None:
            return [_contract_second(h, p) for h in _unit_rows(b)], self.first
        return None

    def dual(self) -> Cone:
        return TensorMin(self.first.dual(), self.second.dual())

    def project(self, x) -> np.ndarray:
        x = _as_vec(x, self.dim)
        inner = TensorMin(self.first.dual(), self.second.dual())
        try:
            return x + inner.project(-x)
        except ConeError as exc:
            raise ConeError("projection onto TensorMax needs generators of both dual factors") from exc

    def interior_margin(self, x) -> float:
        x = _as_vec(x, self.dim)
        if self._contractions is None:
            raise ConeError("TensorMax interior test needs generators of a dual factor")
        mats, cone = self._contractions
        return min(cone.interior_margin(A @ x) for A in mats)

    def interior_point(self) -> np.ndarray:
        return np.kron(self.first.interior_point(), self.second.interior_point())

    def sample(self, rng, size=1):
        # products of members lie in the minimal, hence the maximal, tensor product
        a = self.first.sample(rng, size * 3)
        b = self.second.sample(rng, size * 3)
        prods = np.einsum("ki,kj->kij", a, b).reshape(size, 3, self.dim)
        return prods.sum(axis=1)

    def _rays(self) -> np.ndarray:
        # small cases only: enumerate against the product generators of the dual
        try:
            normals = TensorMin(self.first.dual(), self.second.dual())._need_vrep().gens
        except ConeError:
            raise ConeError("generators unsupported for TensorMax; dualise first") from None
        key = (normals.shape, normals.tobytes())
        if key not in _TENSOR_MAX_RAYS:
            _TENSOR_MAX_RAYS[key] = _enumerate_rays(normals, self.dim, max_subsets=20_000)
        return _TENSOR_MAX_RAYS[key]

    def lift(self) -> Lift:
        if self._contractions is not None:
            mats, cone = self._contractions
            inner = cone.lift()
            return Lift.intersection([inner.preimage(A) for A in mats])
        return TensorMin(self.first.dual(), self.second.dual()).lift().dual()


class DualOf(Cone):
    """Dual cone of a cone with no analytic dual representation."""

    def __init__(self, cone: Cone):
        self.cone = cone
        self.dim = cone.dim

    def __repr__(self):
        return f"DualOf({self.cone!r})"

    def dual(self) -> Cone:
        return self.cone

    def project(self, x) -> np.ndarray:
        x = _as_vec(x, self.dim)
        return x + self.cone.project(-x)

    def interior_margin(self, x) -> float:
        x = _as_vec(x, self.dim)
        if isinstance(self.cone, PsdHermitian):
            return self.cone.interior_margin(x)
        g = self.cone.generators()
        if g.shape[0] == 0:
            return np.inf
        return float((_unit_rows(g) @ x).min())

    def interior_point(self) -> np.ndarray:
        analytic = self.cone.dual()
        if not isinstance(analytic, DualOf):
            return analytic.interior_point()
        return PolyhedralH(self.cone._rays(), dim=self.dim).interior_point()

    def sample(self, rng, size=1):
        return np.array([self.project(rng.normal(size=self.dim)) for _ in range(size)])

    def _rays(self) -> np.ndarray:
        analytic = self.cone.dual()
        if not isinstance(analytic, DualOf):
            return analytic._rays()
        return _enumerate_rays(self.cone._rays(), self.dim)

    @property
    def is_polyhedral(self) -> bool:
        return self.cone.is_polyhedral

    def lift(self) -> Lift:
        return self.cone.lift().dual()


class Intersection(Cone):
    """Intersection of polyhedral cones of equal dimension.

    Only the lifted description is available, so membership goes through a
    linear program and projection is unsupported.
    """

    def __init__(self, parts: Sequence[Cone]):
        self.parts = tuple(parts)
        if not self.parts:
            raise ValueError("need at least one cone")
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise DimensionError("intersected cones must share a dimension")
        _require_polyhedral(*self.parts)
        self.dim = dims.pop()

    def __repr__(self):
        return f"Intersection({', '.join(repr(p) for p in self.parts)})"

    def interior_margin(self, x) -> float:
        x = _as_vec(x, self.dim)
        return min(p.interior_margin(x) for p in self.parts)

    def interior_point(self) -> np.ndarray:
        raise ConeError("no interior point construction for an intersection")

    def sample(self, rng, size=1):
        raise ConeError("sampling unsupported for an intersection")

    def lift(self) -> Lift:
        return Lift.intersection([p.lift() for p in self.parts])


# ---------------------------------------------------------------------------
# functional interface


def zero_cone(n: int) -> PolyhedralV:
    """``{0}`` in ``R^n``; as a slack cone it encodes equality constraints."""
    return PolyhedralV(np.zeros((0, n)), dim=n)


def free_cone(n: int) -> PolyhedralH:
    """All of ``R^n``."""
    return PolyhedralH(np.zeros((0, n)), dim=n)


def contains(cone: Cone, x, tol: float = DEFAULT_TOL) -> bool:
    return cone.contains(x, tol)


def strictly_contains(cone: Cone, x, margin: float) -> bool:
    return cone.strictly_contains(x, margin)


def interior_margin(cone: Cone, x) -> float:
    return cone.interior_margin(x)


def dual(cone: Cone) -> Cone:
    return cone.dual()


def project(cone: Cone, x) -> np.ndarray:
    return cone.project(x)


def cone_dim(cone: Cone) -> int:
    return cone.dim


def generators(cone: Cone) -> np.ndarray:
    return cone.generators()
