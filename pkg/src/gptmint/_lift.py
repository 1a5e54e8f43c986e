"""Lifted (extended) polyhedral descriptions of cones.

A cone ``K`` in ``R^n`` is described as the projection

    K = { x : exists w >= 0, f free with
              Gx x + Gw w + Gf f >= 0,
              Ex x + Ew w + Ef f  = 0 }

Every polyhedral cone variant builds one of these, and the description is
closed under products, linear images, preimages, intersections and duals.
That lets the LP path handle duals of tensor composites exactly without ever
converting between vertex and facet representations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag


def _bd(*mats: np.ndarray) -> np.ndarray:
    rows = sum(m.shape[0] for m in mats)
    cols = sum(m.shape[1] for m in mats)
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols))
    return block_diag(*mats)


@dataclass(frozen=True)
class Lift:
    Gx: np.ndarray
    Gw: np.ndarray
    Gf: np.ndarray
    Ex: np.ndarray
    Ew: np.ndarray
    Ef: np.ndarray

    @property
    def n(self) -> int:
        return self.Gx.shape[1]

    @property
    def nw(self) -> int:
        return self.Gw.shape[1]

    @property
    def nf(self) -> int:
        return self.Gf.shape[1]

    @property
    def n_ineq(self) -> int:
        return self.Gx.shape[0]

    @property
    def n_eq(self) -> int:
        return self.Ex.shape[0]

    # -- constructors -----------------------------------------------------

    @staticmethod
    def from_inequalities(normals: np.ndarray) -> "Lift":
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        r, n = normals.shape
        z = np.zeros((r, 0))
        return Lift(normals, z, z, np.zeros((0, n)), np.zeros((0, 0)), np.zeros((0, 0)))

    @staticmethod
    def from_generators(gens: np.ndarray, n: int) -> "Lift":
        gens = np.asarray(gens, dtype=float).reshape(-1, n)
        k = gens.shape[0]
        return Lift(
            np.zeros((0, n)), np.zeros((0, k)), np.zeros((0, 0)),
            np.eye(n), -gens.T, np.zeros((n, 0)),
        )

    @staticmethod
    def free(n: int) -> "Lift":
        return Lift.from_inequalities(np.zeros((0, n)))

    # -- algebra ----------------------------------------------------------

    def preimage(self, A: np.ndarray) -> "Lift":
        """{x : A x in K}."""
        A = np.asarray(A, dtype=float)
        return Lift(self.Gx @ A, self.Gw, self.Gf, self.Ex @ A, self.Ew, self.Ef)

    def image(self, M: np.ndarray) -> "Lift":
        """{M z : z in K}; the old variable becomes a free auxiliary."""
        M = np.asarray(M, dtype=float)
        n_new = M.shape[0]
        ri, re = self.n_ineq, self.n_eq
        Gx = np.zeros((ri, n_new))
        Gf = np.hstack([self.Gx, self.Gf])
        Ex = np.vstack([np.zeros((re, n_new)), np.eye(n_new)])
        Ew = np.vstack([self.Ew, np.zeros((n_new, self.nw))])
        Ef = np.vstack([np.hstack([self.Ex, self.Ef]), np.hstack([-M, np.zeros((n_new, self.nf))])])
        return Lift(Gx, self.Gw, Gf, Ex, Ew, Ef)

    @staticmethod
    def product(parts: list["Lift"]) -> "Lift":
        return Lift(
            _bd(*[p.Gx for p in parts]), _bd(*[p.Gw for p in parts]), _bd(*[p.Gf for p in parts]),
            _bd(*[p.Ex for p in parts]), _bd(*[p.Ew for p in parts]), _bd(*[p.Ef for p in parts]),
        )

    @staticmethod
    def intersection(parts: list["Lift"]) -> "Lift":
        n = parts[0].n
        Gx = np.vstack([p.Gx for p in parts]) if parts else np.zeros((0, n))
        Ex = np.vstack([p.Ex for p in parts]) if parts else np.zeros((0, n))
        # auxiliaries are private to each part
        Gw = _bd(*[p.Gw for p in parts])
        Gf = _bd(*[p.Gf for p in parts])
        Ew = _bd(*[p.Ew for p in parts])
        Ef = _bd(*[p.Ef for p in parts])
        return Lift(Gx, Gw, Gf, Ex, Ew, Ef)

    def dual(self) -> "Lift":
        """Lifted description of the dual cone, by LP duality.

        y is in K* iff there are mu >= 0 (one per inequality row) and nu (one
        per equality row) with y = Gx' mu + Ex' nu, Gw' mu + Ew' nu <= 0 and
        Gf' mu + Ef' nu = 0.
        """
        n, ri, re = self.n, self.n_ineq, self.n_eq
        Ex = np.vstack([np.eye(n), np.zeros((self.nf, n))])
        Ew = np.vstack([-self.Gx.T, self.Gf.T])
        Ef = np.vstack([-self.Ex.T, self.Ef.T])
        Gx = np.zeros((self.nw, n))
        Gw = -self.Gw.T
        Gf = -self.Ew.T
        assert Ew.shape == (n + self.nf, ri) and Ef.shape == (n + self.nf, re)
        return Lift(Gx, Gw, Gf, Ex, Ew, Ef)


def lp_blocks(lift: Lift, x_map: np.ndarray, x_const: np.ndarray, n_vars: int, offset: int):
    """Rows constraining ``z = x_map @ v + x_const`` to the lifted cone.

    ``v`` is the LP decision vector of length ``n_vars``; the lift's own
    auxiliaries occupy columns ``offset : offset + nw + nf``.  Returns
    ``(A_ub, b_ub, A_eq, b_eq)`` in scipy ``linprog`` convention
    (``A_ub v <= b_ub``).
    """
    ri, re = lift.n_ineq, lift.n_eq
    nw, nf = lift.nw, lift.nf
    A_ge = np.zeros((ri, n_vars))
    A_ge += lift.Gx @ x_map
    A_ge[:, offset:offset + nw] += lift.Gw
    A_ge[:, offset + nw:offset + nw + nf] += lift.Gf
    c_ge = lift.Gx @ x_const
    A_eq = np.zeros((re, n_vars))
    A_eq += lift.Ex @ x_map
    A_eq[:, offset:offset + nw] += lift.Ew
    A_eq[:, offset + nw:offset + nw + nf] += lift.Ef
    c_eq = lift.Ex @ x_const
    # G v + c >= 0  ->  -G v <= c ;  E v + c = 0  ->  E v = -c
    return -A_ge, c_ge, A_eq, -c_eq
