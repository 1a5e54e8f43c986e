import numpy as np
import pytest

from gptmint.errors import ValidationError
from gptmint.theories import (
    by_name, classical, gbit, polygon, quantum, random_strategy, wiesner_strategy,
)

SHIPPED = [classical(2), classical(3), quantum(2), quantum(3), gbit(), polygon(5), polygon(6),
           polygon(6, restricted_effects=True), polygon(8, restricted_effects=True)]


def test_classical_unit_effect():
    th = classical(2)
    assert th.system.unit_effect @ np.array([1.0, 0.0]) == 1.0


def test_quantum_maximally_mixed_is_interior():
    A = quantum(2).system
    mm = A.state_cone.from_matrix(np.eye(2) / 2)
    assert A.unit_effect @ mm == pytest.approx(1.0)
    assert A.state_cone.interior_margin(mm) == pytest.approx(0.5)


@pytest.mark.parametrize("th", SHIPPED, ids=lambda t: t.ref)
def test_unit_margin(th):
    assert th.system.unit_margin >= 1e-3


@pytest.mark.parametrize("th", SHIPPED, ids=lambda t: t.ref)
def test_no_restriction_flags(th):
    restricted = bool(th.params.get("restricted_effects"))
    assert th.system.satisfies_no_restriction() == (not restricted)


def test_polygon4_is_gbit_up_to_linear_map():
    sq, p4 = gbit().system.state_cone, polygon(4).system.state_cone
    V, W = sq.gens, p4.gens
    T = np.linalg.solve(V[:3], W[:3]).T  # T v_k = w_k for k < 3
    assert np.allclose(T @ V[3], W[3])
    grid = np.linspace(-0.25, 1.25, 13)
    for a in grid:
        for b in grid:
            x = np.array([a, b, 1.0])
            assert sq.contains(x, 1e-9) == p4.contains(T @ x, 1e-9)


def test_by_name_roundtrip():
    for th in SHIPPED:
        assert by_name(th.ref).ref == th.ref
    for bad in ("classical:1", "quantum", "polygon:6:weird", "torus:3", "classical:x"):
        with pytest.raises(ValidationError):
            by_name(bad)


def test_wiesner_strategies():
    q = wiesner_strategy(quantum(2))
    assert len(q) == 4 and np.allclose(q.probabilities, 0.25)
    c = wiesner_strategy(classical(2))
    assert len(c) == 2 and np.allclose(c.probabilities, 0.5)
    g = wiesner_strategy(gbit())
    assert len(g) == 4
    with pytest.raises(ValidationError):
        wiesner_strategy(polygon(5))
    with pytest.raises(ValidationError):
        wiesner_strategy(quantum(3))


def test_even_polygon_exposing_effects_pick_out_one_vertex():
    th = polygon(6)
    vals = th.exposing_effects @ th.extremal_states.T
    assert np.allclose(np.diag(vals), 1.0)
    assert np.all(vals[~np.eye(6, dtype=bool)] < 1 - 1e-6)


@pytest.mark.parametrize("th", SHIPPED, ids=lambda t: t.ref)
def test_random_strategies_are_valid(th):
    rng = np.random.default_rng(5)
    for sharp in (True, False):
        s = random_strategy(th, rng, sharp=sharp)
        assert abs(s.probabilities.sum() - 1) < 1e-12
