"""Built-in theories and their canonical bank strategies."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cone_geometry import Orthant, PolyhedralV, PsdHermitian
from .errors import ValidationError
from .gpt_model import (
    CLASSICAL, DEFAULT_RULE, POLYHEDRAL, QUANTUM, ProcessCone, System, compose_systems,
)


@dataclass(frozen=True, eq=False)
class TheoryDescriptor:
    """A named theory: its elementary system and how to build process cones.

    ``extremal_states`` / ``exposing_effects`` are filled for polytope
    theories and the classical simplex; they are what the Wiesner and random
    strategy builders draw from.
    """

    name: str
    params: dict
    system: System
    rule: str = DEFAULT_RULE
    extremal_states: Optional[np.ndarray] = field(default=None, repr=False)
    exposing_effects: Optional[np.ndarray] = field(default=None, repr=False)
    process_cone_factory: Optional[Callable] = field(default=None, repr=False)

    @property
    def ref(self) -> str:
        """Short name used on the command line, e.g. ``quantum:2``."""
        if self.name in ("classical", "quantum"):
            return f"{self.name}:{next(iter(self.params.values()))}"
        if self.name == "polygon":
            tag = ":restricted" if self.params.get("restricted_effects") else ""
            return f"polygon:{self.params['n']}{tag}"
        return self.name

    def compose(self, systems) -> System:
        return compose_systems(list(systems), self.rule)

    def process_cone(self, inp: System, out: System) -> ProcessCone:
        if self.process_cone_factory is not None:
            return ProcessCone(inp, out, self.process_cone_factory(inp, out))
        return ProcessCone(inp, out)

    def counterfeit_cone(self, system: Optional[System] = None) -> ProcessCone:
        """Process cone of maps ``A -> AA``."""
        A = system if system is not None else self.system
        return self.process_cone(A, self.compose([A, A]))


def classical(n: int) -> TheoryDescriptor:
    if int(n) != n or n < 2:
        raise ValidationError("classical(n) needs an integer n >= 2")
    n = int(n)
    K = Orthant(n)
    sys = System(f"C{n}", K, K, np.ones(n), CLASSICAL)
    eye = np.eye(n)
    return TheoryDescriptor("classical", {"n": n}, sys, extremal_states=eye, exposing_effects=eye)


def quantum(d: int) -> TheoryDescriptor:
    if int(d) != d or d < 2:
        raise ValidationError("quantum(d) needs an integer d >= 2")
    d = int(d)
    K = PsdHermitian(d)
    sys = System(f"Q{d}", K, K, K.from_matrix(np.eye(d)), QUANTUM, qdims=(d,))
    return TheoryDescriptor("quantum", {"d": d}, sys)


def _normalise_effects(effects: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    vals = effects @ vertices.T
    return effects / vals.max(axis=1, keepdims=True)


def _exposing(vertices: np.ndarray, facets: np.ndarray, unit: np.ndarray) -> np.ndarray:
    """For each vertex, ``u - c * (sum of facets through it)`` scaled to stay non-negative."""
    vals = facets @ vertices.T
    out = []
    for k, v in enumerate(vertices):
        through = np.abs(vals[:, k]) <= 1e-9
        if through.sum() < 2:
            raise ValidationError("vertex is not an intersection of facets")
        g = facets[through].sum(axis=0)
        gv = g @ vertices.T
        others = gv > 1e-12
        c = float((1.0 / gv[others]).min())
        out.append(unit - c * g)
    return np.array(out)


def _polytope_theory(name, params, label, vertices, facets, restricted: bool) -> TheoryDescriptor:
    unit = np.zeros(vertices.shape[1])
    unit[-1] = 1.0
    facets = _normalise_effects(facets, vertices)
    expose = _exposing(vertices, facets, unit)
    states = PolyhedralV(vertices)
    if restricted:
        effects = PolyhedralV(np.vstack([expose, unit[None, :] - expose]))
    else:
        effects = PolyhedralV(facets)
    sys = System(label, states, effects, unit, POLYHEDRAL)
    return TheoryDescriptor(name, params, sys, extremal_states=vertices, exposing_effects=expose)


def gbit() -> TheoryDescriptor:
    """Square state space: coordinates ``(p(0|0), p(0|1), 1)``."""
    vertices = np.array([[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
    facets = np.array([[1, 0, 0], [-1, 0, 1], [0, 1, 0], [0, -1, 1]], dtype=float)
    return _polytope_theory("gbit", {}, "gbit", vertices, facets, False)


def polygon(n: int, restricted_effects: bool = False) -> TheoryDescriptor:
    """Regular ``n``-gon state space; the unit effect reads the last coordinate.

    With ``restricted_effects`` the effect cone is generated by the exposing
    effects ``e_k`` and their complements ``u - e_k``, a proper subcone of the
    dual of the state cone.
    """
    if int(n) != n or n < 3:
        raise ValidationError("polygon(n) needs an integer n >= 3")
    n = int(n)
    ang = 2 * np.pi * np.arange(n) / n
    vertices = np.column_stack([np.cos(ang), np.sin(ang), np.ones(n)])
    facets = np.cross(vertices, np.roll(vertices, -1, axis=0))
    centre = np.array([0.0, 0.0, 1.0])
    facets *= np.sign(facets @ centre)[:, None]
    label = f"P{n}" + ("r" if restricted_effects else "")
    return _polytope_theory("polygon", {"n": n, "restricted_effects": bool(restricted_effects)},
                            label, vertices, facets, restricted_effects)


def by_name(ref: str) -> TheoryDescriptor:
    """Parse ``classical:3``, ``quantum:2``, ``gbit``, ``polygon:5`` or ``polygon:5:restricted``."""
    parts = ref.strip().split(":")
    head = parts[0].lower()
    try:
        if head == "classical" and len(parts) == 2:
            return classical(int(parts[1]))
        if head == "quantum" and len(parts) == 2:
            return quantum(int(parts[1]))
        if head == "gbit" and len(parts) == 1:
            return gbit()
        if head == "polygon" and len(parts) in (2, 3):
            restricted = len(parts) == 3
            if restricted and parts[2] != "restricted":
                raise ValidationError(f"unknown polygon option {parts[2]!r}")
            return polygon(int(parts[1]), restricted)
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad theory reference {ref!r}: {exc}") from exc
    raise ValidationError(f"unknown theory reference {ref!r}")


# ---------------------------------------------------------------------------
# strategies


def _ket(d, *amps):
    v = np.zeros(d, dtype=complex)
    v[: len(amps)] = amps
    return v / np.linalg.norm(v)


def bb84_kets() -> list:
    r = 1 / np.sqrt(2)
    return [_ket(2, 1, 0), _ket(2, 0, 1), _ket(2, r, r), _ket(2, r, -r)]


def pure_state(K: PsdHermitian, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return K.from_matrix(np.outer(psi, psi.conj()))


def wiesner_strategy(theory: TheoryDescriptor):
    """Canonical strategy: uniform over extremal states with sharp effects."""
    from .money import BankStrategy

    sys = theory.system
    if theory.name == "quantum":
        if theory.params["d"] != 2:
            raise ValidationError("the Wiesner strategy is defined for a single qubit")
        K = sys.state_cone
        vecs = [pure_state(K, k) for k in bb84_kets()]
        return BankStrategy(sys, [(0.25, v, v) for v in vecs])
    if theory.extremal_states is None or theory.exposing_effects is None:
        raise ValidationError(f"theory {theory.name!r} has no exposing effects for its extremal states")
    if theory.name == "polygon" and theory.params["n"] % 2:
        raise ValidationError("the Wiesner strategy needs an even polygon")
    S, E = theory.extremal_states, theory.exposing_effects
    p = 1.0 / S.shape[0]
    return BankStrategy(sys, [(p, S[k], E[k]) for k in range(S.shape[0])])


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=d) + 1j * rng.normal(size=d)
    return z / np.linalg.norm(z)


def random_strategy(theory: TheoryDescriptor, rng: np.random.Generator, k: Optional[int] = None,
                    sharp: bool = True):
    """Random valid strategy.

    Quantum theories use random pure states with their projectors.  Polytope
    and classical theories use a random subset of extremal states with their
    exposing effects.  With ``sharp=False`` some effects are replaced by
    the discarding effect, which keeps the strategy valid but breaks
    verification sharpness.
    """
    from .money import BankStrategy

    sys = theory.system
    if theory.name == "quantum":
        d = theory.params["d"]
        k = k or int(rng.integers(1, 5))
        K = sys.state_cone
        states = [pure_state(K, random_pure_state(d, rng)) for _ in range(k)]
        effects = list(states)
    else:
        S, E = theory.extremal_states, theory.exposing_effects
        if S is None:
            raise ValidationError(f"theory {theory.name!r} has no extremal states on record")
        k = k or int(rng.integers(1, S.shape[0] + 1))
        if k > S.shape[0]:
            raise ValidationError("more items requested than extremal states")
        idx = np.sort(rng.choice(S.shape[0], size=k, replace=False))
        states = [S[i] for i in idx]
        effects = [E[i] for i in idx]
    if not sharp:
        effects = [sys.unit_effect.copy() if rng.random() < 0.5 else e for e in effects]
    p = rng.dirichlet(np.ones(k)) if k > 1 else np.ones(1)
    p = np.maximum(p, 1e-3)
    p /= p.sum()
    return BankStrategy(sys, [(float(p[i]), states[i], effects[i]) for i in range(k)])
