"""Systems, composites and process cones of a generalised probabilistic theory.

Conventions
-----------
A system of dimension ``n`` has its states and effects in ``R^n`` with the
Euclidean pairing.  A linear map ``A -> B`` with matrix ``M`` (``n_B x n_A``)
is stored as the vector ``M.T.reshape(-1)``, i.e. input index major.  With
this layout ``<e, M s> = <kron(s, e), f>``, so the process space is the tensor
product ``V^A (x) V^B`` and ``kron(u_A, t)`` is the map "discard the input,
prepare ``t``".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from .cone_geometry import (
    DEFAULT_TOL, Cone, Intersection, Orthant, Product, PsdHermitian, TensorMax, TensorMin,
)
from .errors import ConeError, DimensionError, ValidationError

log = logging.getLogger(__name__)

EFFECT_CONE = "EffectCone"
DUAL_STATE_CONE = "DualStateCone"
ORDERINGS = (EFFECT_CONE, DUAL_STATE_CONE)

MIN_TENSOR = "MinTensor"
MAX_TENSOR = "MaxTensor"
DEFAULT_RULE = "default"

QUANTUM = "quantum"
CLASSICAL = "classical"
POLYHEDRAL = "polyhedral"
CUSTOM = "custom"


def _vec(x, n: int, what: str = "vector") -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise DimensionError(f"{what} has length {x.shape[0]}, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{what} has non-finite entries")
    return x


def _rays_or_none(cone: Cone):
    try:
        return cone._rays()
    except ConeError:
        return None


@dataclass(frozen=True, eq=False)
class System:
    """A GPT system: state cone, effect cone and the discarding effect.

    ``kind`` records which native composition applies (quantum, classical or
    polyhedral); ``qdims`` lists the Hilbert-space factors of a quantum
    system.  ``factors`` is empty for an elementary system.
    """

    label: str
    state_cone: Cone
    effect_cone: Cone
    unit_effect: np.ndarray
    kind: str = CUSTOM
    qdims: tuple = ()
    factors: tuple = ()
    rule: str = ""
    validate: bool = field(default=True, repr=False)
    unit_margin: float = field(default=float("nan"), init=False)

    def __post_init__(self):
        n = self.state_cone.dim
        if self.effect_cone.dim != n:
            raise DimensionError(
                f"state cone has dimension {n} but effect cone has {self.effect_cone.dim}")
        if n < 1:
            raise DimensionError("a system needs dimension at least 1")
        u = _vec(self.unit_effect, n, "unit effect")
        object.__setattr__(self, "unit_effect", u)
        object.__setattr__(self, "qdims", tuple(int(q) for q in self.qdims))
        object.__setattr__(self, "factors", tuple(self.factors))
        try:
            margin = float(self.effect_cone.interior_margin(u))
        except ConeError as exc:
            raise ValidationError(
                f"cannot decide whether the discarding effect of {self.label!r} is interior: {exc}"
            ) from exc
        object.__setattr__(self, "unit_margin", margin)
        if self.validate:
            self._validate()

    @property
    def dim(self) -> int:
        return self.state_cone.dim

    def _validate(self, tol: float = 1e-7) -> None:
        if not self.unit_margin > 0:
            raise ValidationError(
                f"discarding effect of {self.label!r} is not in the interior of the effect cone "
                f"(margin {self.unit_margin:.3g})")
        S = _rays_or_none(self.state_cone)
        E = _rays_or_none(self.effect_cone)
        if S is not None and E is not None and S.shape[0] * E.shape[0] <= 2_000_000:
            pair = E @ S.T
            scale = np.outer(np.linalg.norm(E, axis=1), np.linalg.norm(S, axis=1))
            if np.any(pair < -tol * np.maximum(scale, 1.0)):
                raise ValidationError(
                    f"effects and states of {self.label!r} are not mutually non-negative "
                    "(the effect cone must lie in the dual of the state cone)")
        if S is not None:
            if not np.any(S @ self.unit_effect > tol):
                raise ValidationError(f"{self.label!r} has no causal state")

    def satisfies_no_restriction(self, tol: float = 1e-7) -> bool:
        """Every vector non-negative on states is a physical effect.

        Decided exactly for native quantum and classical systems and for
        minimal-tensor composites of such systems; otherwise the extreme rays
        of the dual state cone are tested for membership in the effect cone.
        A cone whose rays cannot be enumerated counts as restricted.
        """
        if self.kind in (QUANTUM, CLASSICAL):
            return True
        if self.factors and self.rule == MIN_TENSOR:
            return all(f.satisfies_no_restriction(tol) for f in self.factors)
        rays = _rays_or_none(self.state_cone.dual())
        if rays is None:
            return False
        return all(self.effect_cone.contains(r / max(np.linalg.norm(r), 1e-300), tol) for r in rays)

    # convenience ----------------------------------------------------------

    def is_causal_state(self, s, tol: float = DEFAULT_TOL) -> bool:
        return is_causal_state(self, s, tol)

    def is_subcausal_state(self, s, tol: float = DEFAULT_TOL) -> bool:
        return is_subcausal_state(self, s, tol)

    def ordering_cone(self, ordering: str) -> Cone:
        """Cone against which ``u - effect`` is tested."""
        if ordering == EFFECT_CONE:
            return self.effect_cone
        if ordering == DUAL_STATE_CONE:
            return self.state_cone.dual()
        raise ValueError(f"ordering must be one of {ORDERINGS}")

    def __repr__(self):
        return f"System({self.label!r}, dim={self.dim}, kind={self.kind})"


# ---------------------------------------------------------------------------
# states


def _check_state(sys: System, s, tol: float) -> np.ndarray:
    s = _vec(s, sys.dim, "state")
    if not sys.state_cone.contains(s, tol):
        raise ValidationError(f"vector is not in the state cone of {sys.label!r}")
    return s


def is_causal_state(sys: System, s, tol: float = DEFAULT_TOL) -> bool:
    s = _check_state(sys, s, tol)
    return abs(float(sys.unit_effect @ s) - 1.0) <= tol


def is_subcausal_state(sys: System, s, tol: float = DEFAULT_TOL) -> bool:
    s = _check_state(sys, s, tol)
    return float(sys.unit_effect @ s) <= 1.0 + tol


def is_subcausal_effect(sys: System, e, tol: float = DEFAULT_TOL,
                        ordering: str = EFFECT_CONE) -> bool:
    """``e`` is an effect and ``u - e`` is in the ordering cone."""
    e = _vec(e, sys.dim, "effect")
    cone = sys.ordering_cone(ordering)
    return cone.contains(e, tol) and cone.contains(sys.unit_effect - e, tol)


# ---------------------------------------------------------------------------
# composites


def _fold(parts, op):
    return reduce(op, parts)


def compose_systems(systems: Sequence[System], rule: str = DEFAULT_RULE,
                    state_cone: Optional[Cone] = None, effect_cone: Optional[Cone] = None,
                    label: Optional[str] = None) -> System:
    """Composite system with coordinates ``kron`` of the factor coordinates.

    ``rule`` is ``"default"`` (native composite for quantum and classical
    factors, otherwise minimal states with maximal effects), ``"MinTensor"``,
    ``"MaxTensor"`` or ``"Custom"`` (then both cones must be given).
    """
    systems = list(systems)
    if not systems:
        raise ValueError("need at least one system")
    if len(systems) == 1 and rule != "Custom":
        return systems[0]
    label = label or "(" + "⊗".join(s.label for s in systems) + ")"
    unit = reduce(np.kron, [s.unit_effect for s in systems])
    kinds = {s.kind for s in systems}

    if rule == "Custom":
        if state_cone is None or effect_cone is None:
            raise ValueError("a custom composite needs both a state cone and an effect cone")
        return System(label, state_cone, effect_cone, unit, CUSTOM, (), tuple(systems), "Custom")
    if rule not in (DEFAULT_RULE, MIN_TENSOR, MAX_TENSOR):
        raise ValueError(f"unknown composite rule {rule!r}")

    if rule == DEFAULT_RULE and kinds == {QUANTUM}:
        qd = tuple(q for s in systems for q in s.qdims)
        K = PsdHermitian(factors=qd)
        return System(label, K, K, unit, QUANTUM, qd, tuple(systems), DEFAULT_RULE, validate=False)
    if kinds == {CLASSICAL}:
        n = int(np.prod([s.dim for s in systems]))
        K = Orthant(n)
        return System(label, K, K, unit, CLASSICAL, (), tuple(systems), DEFAULT_RULE, validate=False)
    if systems[0].kind == CLASSICAL and rule == DEFAULT_RULE:
        # a classical factor in front: one copy of the rest per outcome
        rest = compose_systems(systems[1:], rule)
        k = systems[0].dim
        return System(label, Product([rest.state_cone] * k), Product([rest.effect_cone] * k),
                      unit, CUSTOM, (), tuple(systems), DEFAULT_RULE, validate=False)

    if not all(s.state_cone.is_polyhedral and s.effect_cone.is_polyhedral for s in systems):
        raise ValidationError(
            "minimal/maximal tensor composites need polyhedral factors; "
            "use a custom composite (or a classical leading factor) otherwise")
    min_states = rule in (DEFAULT_RULE, MIN_TENSOR)
    if min_states:
        Ks = _fold([s.state_cone for s in systems], TensorMin)
        Ke = _fold([s.effect_cone for s in systems], TensorMax)
        tag = MIN_TENSOR
    else:
        Ks = _fold([s.state_cone for s in systems], TensorMax)
        Ke = _fold([s.effect_cone for s in systems], TensorMin)
        tag = MAX_TENSOR
    return System(label, Ks, Ke, unit, POLYHEDRAL, (), tuple(systems), tag, validate=False)


def marginalise(composite: System, s, keep_index: int) -> np.ndarray:
    """Apply the discarding effect to every factor except ``keep_index``."""
    facs = composite.factors
    if not facs:
        raise ValueError("marginalise needs a composite system")
    if not 0 <= keep_index < len(facs):
        raise IndexError(f"keep_index must be in [0, {len(facs)})")
    s = _vec(s, composite.dim, "state")
    t = s.reshape([f.dim for f in facs])
    for j in reversed(range(len(facs))):
        if j != keep_index:
            t = np.tensordot(t, facs[j].unit_effect, axes=([j], [0]))
    return np.asarray(t).reshape(-1)


# ---------------------------------------------------------------------------
# processes


def process_dims(f, n_in: int) -> int:
    f = np.asarray(f, dtype=float).reshape(-1)
    if n_in < 1 or f.shape[0] % n_in:
        raise DimensionError(f"process vector of length {f.shape[0]} is not a map from R^{n_in}")
    return f.shape[0] // n_in


def process_matrix(f, n_in: int) -> np.ndarray:
    """Matrix (``n_out x n_in``) of a process vector."""
    n_out = process_dims(f, n_in)
    return np.asarray(f, dtype=float).reshape(n_in, n_out).T


def process_vector(M) -> np.ndarray:
    return np.asarray(M, dtype=float).T.reshape(-1)


def apply_process(f, s) -> np.ndarray:
    s = np.asarray(s, dtype=float).reshape(-1)
    return process_matrix(f, s.shape[0]) @ s


def pull_back(f, e, n_in: int) -> np.ndarray:
    """Effect ``e o f`` on the input system."""
    n_out = process_dims(f, n_in)
    return np.asarray(f, dtype=float).reshape(n_in, n_out) @ _vec(e, n_out, "effect")


def compose(f, g, n_in: int) -> np.ndarray:
    """Process vector of ``g o f`` where ``f`` acts first on ``R^{n_in}``."""
    Mf = process_matrix(f, n_in)
    Mg = process_matrix(g, Mf.shape[0])
    return process_vector(Mg @ Mf)


def identity_process(n: int) -> np.ndarray:
    return np.eye(n).reshape(-1)


def prepare_process(u_in, t) -> np.ndarray:
    """Discard the input and prepare ``t``."""
    return np.kron(np.asarray(u_in, float), np.asarray(t, float))


def default_process_cone(inp: System, out: System) -> Cone:
    """Maximal natural cone of maps between two systems.

    Quantum to quantum gives completely positive maps (Choi operators),
    classical to classical gives entrywise non-negative matrices, and
    polyhedral systems get positivity-preserving maps.  When either side has
    a restricted effect cone, maps must also pull physical effects of the
    output back to physical effects of the input; otherwise a process could
    measure an unphysical effect.
    """
    if inp.kind == QUANTUM and out.kind == QUANTUM:
        return PsdHermitian(factors=inp.qdims + out.qdims,
                            transposed=(True,) * len(inp.qdims) + (False,) * len(out.qdims))
    if inp.kind == CLASSICAL and out.kind == CLASSICAL:
        return Orthant(inp.dim * out.dim)
    if inp.state_cone.is_polyhedral and out.state_cone.is_polyhedral:
        states = TensorMax(inp.state_cone.dual(), out.state_cone)
        if inp.satisfies_no_restriction() and out.satisfies_no_restriction():
            return states
        effects = TensorMax(inp.effect_cone, out.effect_cone.dual())
        return Intersection([states, effects])
    raise ValidationError(
        f"no default process cone from {inp.label!r} to {out.label!r}; supply a custom cone")


class ProcessCone:
    """Cone of processes between two systems."""

    def __init__(self, input: System, output: System, cone: Optional[Cone] = None):
        self.input = input
        self.output = output
        self.cone = cone if cone is not None else default_process_cone(input, output)
        if self.cone.dim != input.dim * output.dim:
            raise DimensionError(
                f"process cone has dimension {self.cone.dim}, expected {input.dim * output.dim}")

    @property
    def dim(self) -> int:
        return self.cone.dim

    def __repr__(self):
        return f"ProcessCone({self.input.label} -> {self.output.label}, {self.cone!r})"

    def matrix(self, f) -> np.ndarray:
        return process_matrix(_vec(f, self.dim, "process"), self.input.dim)

    def apply(self, f, s) -> np.ndarray:
        return self.matrix(f) @ _vec(s, self.input.dim, "state")

    def pulled_back_unit(self, f) -> np.ndarray:
        return pull_back(_vec(f, self.dim, "process"), self.output.unit_effect, self.input.dim)

    def unit_pullback_operator(self) -> np.ndarray:
        """Matrix ``P`` with ``P f = u_out o f`` (shape ``n_in x dim``)."""
        return np.kron(np.eye(self.input.dim), self.output.unit_effect[None, :])

    def contains(self, f, tol: float = DEFAULT_TOL) -> bool:
        return self.cone.contains(_vec(f, self.dim, "process"), tol)

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Random members, one per row.

        Falls back to sums of measure-and-prepare maps ``kron(e, s)`` with
        physical effects ``e`` and states ``s`` when the cone itself cannot
        be sampled.
        """
        try:
            return self.cone.sample(rng, size)
        except ConeError:
            pass
        E = self.input.effect_cone.sample(rng, 3 * size)
        S = self.output.state_cone.sample(rng, 3 * size)
        terms = np.einsum("ka,kb->kab", E, S).reshape(size, 3, -1)
        return terms.sum(axis=1)

    def _member(self, f, tol: float) -> np.ndarray:
        f = _vec(f, self.dim, "process")
        if not self.cone.contains(f, tol):
            raise ValidationError("vector is not in the process cone")
        return f

    def is_causal(self, f, tol: float = DEFAULT_TOL) -> bool:
        f = self._member(f, tol)
        return float(np.linalg.norm(self.pulled_back_unit(f) - self.input.unit_effect)) <= tol

    def is_subcausal(self, f, ordering: str = EFFECT_CONE, tol: float = DEFAULT_TOL) -> bool:
        f = self._member(f, tol)
        cone = self.input.ordering_cone(ordering)
        return cone.contains(self.input.unit_effect - self.pulled_back_unit(f), tol)

    def identity(self) -> np.ndarray:
        if self.input.dim != self.output.dim:
            raise DimensionError("identity needs equal input and output dimensions")
        return identity_process(self.input.dim)

    def check_positivity(self, f, tol: float = 1e-7) -> bool:
        """``f`` maps state generators to vectors non-negative on output effects."""
        S = _rays_or_none(self.input.state_cone)
        E = _rays_or_none(self.output.effect_cone)
        if S is None or E is None:
            raise ConeError("positivity check needs generators of the input states and output effects")
        vals = E @ self.matrix(f) @ S.T
        return bool(np.all(vals >= -tol))

    def tomography_rank(self) -> int:
        """Rank of the map ``f -> (<e, f(s)>)`` over generator pairs."""
        S = self.input.state_cone._rays()
        E = self.output.effect_cone._rays()
        rows = np.einsum("ia,jb->ijab", S, E).reshape(S.shape[0] * E.shape[0], -1)
        return int(np.linalg.matrix_rank(rows))


def is_causal_process(pc: ProcessCone, f, tol: float = DEFAULT_TOL) -> bool:
    return pc.is_causal(f, tol)


def is_subcausal_process(pc: ProcessCone, f, ordering: str = EFFECT_CONE,
                         tol: float = DEFAULT_TOL) -> bool:
    return pc.is_subcausal(f, ordering, tol)
