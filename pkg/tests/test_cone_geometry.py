import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gptmint.cone_geometry import (
    DualOf, Intersection, Orthant, PolyhedralH, PolyhedralV, Product, PsdHermitian, TensorMax,
    TensorMin, free_cone, hermitian_basis, zero_cone,
)
from gptmint.errors import ConeError, DimensionError

SQUARE = PolyhedralV(np.array([[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], float))


def test_orthant_projection_and_distance():
    K = Orthant(3)
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(K.project(x), [1, 0, 0.5])
    assert K.distance(x) == pytest.approx(2.0)
    assert K.dual() is K
    assert K.contains([0, 0, 0]) and not K.contains([0, -1e-3, 0])


def test_hermitian_basis_is_orthonormal():
    for d in (2, 3):
        B = hermitian_basis(d)
        G = np.array([[np.trace(a @ b).real for b in B] for a in B])
        assert np.allclose(G, np.eye(d * d))
        assert all(np.allclose(b, b.conj().T) for b in B)


def test_psd_roundtrip_and_projection_matches_eigen_clamp():
    rng = np.random.default_rng(3)
    K = PsdHermitian(3)
    A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    H = A + A.conj().T
    x = K.from_matrix(H)
    assert np.allclose(K.to_matrix(x), H)
    w, v = np.linalg.eigh(H)
    P = (v * np.maximum(w, 0)) @ v.conj().T
    assert np.allclose(K.to_matrix(K.project(x)), P)
    assert K.distance(x) == pytest.approx(np.linalg.norm(np.minimum(w, 0)))


def test_square_cone_matches_explicit_inequalities():
    grid = np.linspace(-0.5, 1.5, 9)
    for a in grid:
        for b in grid:
            x = np.array([a, b, 1.0])
            inside = 0 <= a <= 1 and 0 <= b <= 1
            assert SQUARE.contains(x, 1e-9) == inside


def test_polyhedral_duals_are_consistent():
    H = SQUARE.dual()
    assert isinstance(H, PolyhedralH)
    rays = H._rays()
    # each ray is non-negative on the square and tight on two vertices
    vals = rays @ SQUARE.gens.T
    assert np.all(vals >= -1e-12)
    assert all((np.abs(row) < 1e-9).sum() == 2 for row in vals)


def test_nonneg_projection_regression_point():
    # a point strictly inside the octagon cone; an active-set stall once reported it outside
    ang = 2 * np.pi * np.arange(8) / 8
    K = PolyhedralV(np.column_stack([np.cos(ang), np.sin(ang), np.ones(8)]))
    y = np.array([-0.31004844, -0.70642203, 0.9877197])
    assert K.distance(y) < 1e-12


def test_tensor_products_of_orthants_coincide():
    A, B = Orthant(2), Orthant(3)
    mn, mx = TensorMin(A, B), TensorMax(A, B)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.normal(size=6)
        assert mn.contains(x, 1e-9) == mx.contains(x, 1e-9) == bool(np.all(x >= 0))


def test_min_tensor_inside_max_tensor_for_squares():
    mn, mx = TensorMin(SQUARE, SQUARE), TensorMax(SQUARE, SQUARE)
    rng = np.random.default_rng(1)
    for x in mn.sample(rng, 20):
        assert mx.contains(x, 1e-8)
    # an entangled-type element of the maximal product that is not separable
    rays = mx._rays()
    outside = [r for r in rays if not mn.contains(r, 1e-6)]
    assert outside


def test_product_cone_splits_blocks():
    K = Product([Orthant(2), PsdHermitian(2)])
    x = np.concatenate([[-1.0, 2.0], PsdHermitian(2).from_matrix(np.diag([1.0, -3.0]))])
    assert K.distance(x) == pytest.approx(np.hypot(1.0, 3.0))
    assert isinstance(K.dual(), Product)


def test_zero_and_free_cones():
    Z, F = zero_cone(3), free_cone(3)
    x = np.array([1.0, -2.0, 3.0])
    assert np.allclose(Z.project(x), 0)
    assert np.allclose(F.project(x), x)
    assert F.contains(x) and not Z.contains(x)


def test_intersection_membership_and_limits():
    K = Intersection([Orthant(3), SQUARE])
    assert K.contains([0.5, 0.5, 1.0])
    assert not K.contains([-0.5, 0.5, 1.0], 1e-6)
    with pytest.raises(ConeError):
        K.project([1.0, 1.0, 1.0])
    with pytest.raises(DimensionError):
        Intersection([Orthant(2), SQUARE])


def test_dual_of_projection_via_moreau():
    K = DualOf(PsdHermitian(2))
    x = PsdHermitian(2).from_matrix(np.diag([2.0, -1.0]))
    assert np.allclose(PsdHermitian(2).to_matrix(K.project(x)), np.diag([2.0, 0.0]))


def test_dimension_errors():
    with pytest.raises(DimensionError):
        Orthant(3).contains([1.0, 2.0])


CONES = {
    "orthant": Orthant(4),
    "psd2": PsdHermitian(2),
    "psd3": PsdHermitian(3),
    "square": SQUARE,
    "square_dual": SQUARE.dual(),
}


@pytest.mark.parametrize("name", sorted(CONES))
@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_moreau_property(name, data):
    K = CONES[name]
    x = data.draw(arrays(np.float64, K.dim, elements=st.floats(-10, 10)))
    p = K.project(x)
    q = K.dual().project(-x)
    assert np.allclose(p - q, x, atol=1e-8)
    assert abs(p @ q) <= 1e-7 * (1 + x @ x)
    assert K.contains(p, 1e-8) and K.dual().contains(q, 1e-8)
