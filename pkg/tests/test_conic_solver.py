import math

import numpy as np
import pytest

from gptmint.cone_geometry import Orthant, PolyhedralV, PsdHermitian
from gptmint.conic_solver import (
    OPTIMAL, PRIMAL_INFEASIBLE, UNBOUNDED, ConicProgram, LinearOperator, SolverConfig,
    brute_force_polyhedral, check_slater, solve, verify_solution,
)
from gptmint.errors import DimensionError


def one_dim(b=1.0, c=1.0):
    # max c x  s.t. x >= 0, b - x >= 0
    return ConicProgram(np.array([c]), np.array([b]), LinearOperator(np.eye(1)), Orthant(1), Orthant(1))


@pytest.mark.parametrize("method", ["lp", "splitting"])
def test_one_dimensional_program(method):
    s = solve(one_dim(), SolverConfig(method=method))
    assert s.status == OPTIMAL
    assert s.primal_value == pytest.approx(1.0, abs=1e-6)
    assert verify_solution(one_dim(), s)


@pytest.mark.parametrize("method", ["lp", "splitting"])
def test_infeasible_program_has_farkas_certificate(method):
    p = one_dim(b=-1.0)
    s = solve(p, SolverConfig(method=method))
    assert s.status == PRIMAL_INFEASIBLE
    assert verify_solution(p, s)


@pytest.mark.parametrize("method", ["lp", "splitting"])
def test_unbounded_program_has_ray(method):
    # b - phi(x) = 1 + x is always >= 0
    p = ConicProgram(np.array([1.0]), np.array([1.0]), LinearOperator(-np.eye(1)), Orthant(1), Orthant(1))
    s = solve(p, SolverConfig(method=method))
    assert s.status == UNBOUNDED
    assert verify_solution(p, s)


def test_largest_eigenvalue_program():
    # max <C, X> over PSD X with trace X <= 1 equals lambda_max(C)
    rng = np.random.default_rng(7)
    K = PsdHermitian(3)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = A + A.conj().T
    C = K.from_matrix(H)
    tr = K.from_matrix(np.eye(3))
    p = ConicProgram(C, np.array([1.0]), LinearOperator(tr[None, :]), Orthant(1), K)
    s = solve(p)
    assert s.status == OPTIMAL
    assert s.primal_value == pytest.approx(np.linalg.eigvalsh(H).max(), abs=1e-6)
    assert verify_solution(p, s)


def test_verify_rejects_tampered_solution():
    p = one_dim()
    s = solve(p)
    from dataclasses import replace
    bad = replace(s, X=np.array([2.0]))
    assert not verify_solution(p, bad)
    with pytest.raises(DimensionError):
        verify_solution(p, replace(s, X=np.zeros(2)))


def test_slater_detection():
    rep = check_slater(one_dim())
    assert rep.primal_strict and rep.dual_strict
    # feasible set {0}: no strictly feasible primal point
    rep = check_slater(one_dim(b=0.0))
    assert not rep.primal_strict


def _random_polyhedral(rng):
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 3))
    K2 = Orthant(n) if rng.random() < 0.5 else PolyhedralV(np.abs(rng.normal(size=(n + 1, n))) + 0.1)
    K1 = Orthant(m)
    Phi = np.abs(rng.normal(size=(m, n))) + 0.1
    b = np.abs(rng.normal(size=m)) + 0.1
    C = rng.normal(size=n)
    return ConicProgram(C, b, LinearOperator(Phi), K1, K2)


def test_lp_and_splitting_agree_with_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(15):
        p = _random_polyhedral(rng)
        ref = brute_force_polyhedral(p)
        for method in ("lp", "splitting"):
            s = solve(p, SolverConfig(method=method))
            assert s.status == OPTIMAL
            assert math.isclose(s.primal_value, ref, abs_tol=1e-5)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(eps_abs=0)
    with pytest.raises(ValueError):
        SolverConfig(method="magic")
