"""Security analysis of Wiesner-style money schemes in a GPT.

A counterfeiter is a process ``chi : A -> AA``.  Its success probability
against a bank strategy ``{(p_i, s_i, e_i)}`` is ``<C, chi>`` with

    C = sum_i p_i kron(s_i, kron(e_i, e_i)).

The value ``alpha`` maximises this over subcausal processes
(``u_A - u_AA o chi`` an effect).  ``alpha_tilde`` only asks that this
difference is non-negative on states, which gives a program whose dual
variable is an (unnormalised) state ``y`` of ``A``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cone_geometry import Orthant, Product, PsdHermitian, free_cone, hermitian_basis
from .conic_solver import (
    OPTIMAL, PRIMAL_INFEASIBLE, ConicProgram, LinearOperator, SlaterReport, Solution,
    SolverConfig, check_slater, solve, verify_solution,
)
from .errors import CertificateError, GptMintError, SolverError, ValidationError
from .gpt_model import (
    DUAL_STATE_CONE, EFFECT_CONE, ProcessCone, System, compose_systems, marginalise,
    prepare_process,
)

log = logging.getLogger(__name__)

STRATEGY_TOL = 1e-7
PROB_TOL = 1e-12


class NoAmplificationError(GptMintError):
    """alpha_tilde is 1, so repeating the scheme cannot drive the forging probability down."""


# ---------------------------------------------------------------------------
# strategies


@dataclass(frozen=True, eq=False)
class BankStrategy:
    system: System
    items: tuple
    tol: float = STRATEGY_TOL

    def __post_init__(self):
        n = self.system.dim
        items = []
        for k, it in enumerate(self.items):
            try:
                p, s, e = it
            except (TypeError, ValueError):
                raise ValidationError(f"item {k} must be a (p, state, effect) triple") from None
            s = np.asarray(s, dtype=float).reshape(-1)
            e = np.asarray(e, dtype=float).reshape(-1)
            if s.shape[0] != n or e.shape[0] != n:
                raise ValidationError(f"item {k}: state and effect must have length {n}")
            items.append((float(p), s, e))
        if not items:
            raise ValidationError("a bank strategy needs at least one item")
        object.__setattr__(self, "items", tuple(items))
        self._validate()

    def _validate(self) -> None:
        sys, tol = self.system, self.tol
        u = sys.unit_effect
        ps = self.probabilities
        if np.any(~np.isfinite(ps)) or np.any(ps <= 0) or abs(ps.sum() - 1.0) > PROB_TOL:
            raise ValidationError(
                f"probabilities must satisfy p_1, ..., p_n > 0 and sum to 1 (got sum {ps.sum():.17g})")
        for k, (_, s, e) in enumerate(self.items):
            if not sys.state_cone.contains(s, tol):
                raise ValidationError(f"item {k}: s_{k} is not in the state cone")
            if abs(float(u @ s) - 1.0) > tol:
                raise ValidationError(f"item {k}: state is not causal, <u, s_{k}> = {u @ s:.17g} != 1")
            if not sys.effect_cone.contains(e, tol):
                raise ValidationError(f"item {k}: e_{k} is not in the effect cone")
            if not sys.effect_cone.contains(u - e, tol):
                raise ValidationError(f"item {k}: u - e_{k} is not in the effect cone (e_{k} must be subcausal)")
            if abs(float(e @ s) - 1.0) > tol:
                raise ValidationError(
                    f"item {k}: verification must accept the genuine note, <e_{k}, s_{k}> = {e @ s:.17g} != 1")

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([it[0] for it in self.items])

    @property
    def states(self) -> list:
        return [it[1] for it in self.items]

    @property
    def effects(self) -> list:
        return [it[2] for it in self.items]

    def __len__(self):
        return len(self.items)

    def is_spanning(self, tol: float = 1e-9) -> bool:
        return int(np.linalg.matrix_rank(np.array(self.states), tol)) == self.system.dim


def build_verification_functional(s: BankStrategy) -> np.ndarray:
    """Vector ``C`` over ``V_A^{AA}`` with ``<C, chi>`` the acceptance probability."""
    return sum(p * np.kron(st, np.kron(e, e)) for p, st, e in s.items)


def success_probability(s: BankStrategy, chi) -> float:
    return float(build_verification_functional(s) @ np.asarray(chi, dtype=float))


# ---------------------------------------------------------------------------
# programs


def _check_pc(s: BankStrategy, pc: ProcessCone) -> None:
    A = s.system
    if pc.input.dim != A.dim or pc.output.dim != A.dim * A.dim:
        raise ValidationError(
            f"process cone maps R^{pc.input.dim} -> R^{pc.output.dim}, "
            f"expected R^{A.dim} -> R^{A.dim ** 2}")
    if not np.allclose(pc.input.unit_effect, A.unit_effect):
        raise ValidationError("process cone input does not match the strategy's system")


def counterfeit_cone(system: System, rule: str = "default") -> ProcessCone:
    return ProcessCone(system, compose_systems([system, system], rule))


def money_program(s: BankStrategy, pc: ProcessCone, ordering: str = EFFECT_CONE) -> ConicProgram:
    """``max <C, chi>`` over ``chi`` in the process cone with ``u_A - u_AA o chi`` in the ordering cone."""
    _check_pc(s, pc)
    A = s.system
    order = A.ordering_cone(ordering)
    return ConicProgram(
        C=build_verification_functional(s),
        b=A.unit_effect,
        phi=LinearOperator(pc.unit_pullback_operator()),
        K1=order.dual(),
        K2=pc.cone,
    )


@dataclass(frozen=True)
class AlphaResult:
    value: float
    chi: np.ndarray
    y: np.ndarray
    gap: float
    solution: Solution
    program: ConicProgram = field(repr=False)
    verified: bool = True

    @property
    def dual_value(self) -> float:
        return self.solution.dual_value


def _solve_money(s: BankStrategy, pc: ProcessCone, ordering: str, cfg: Optional[SolverConfig],
                 verify_tol: float) -> AlphaResult:
    cfg = cfg or SolverConfig()
    p = money_program(s, pc, ordering)
    sol = solve(p, cfg)
    if sol.status != OPTIMAL:
        raise SolverError(f"counterfeiting program ended with status {sol.status}", sol)
    if not verify_solution(p, sol, verify_tol):
        raise CertificateError("optimal counterfeiter failed independent re-verification", sol)
    return AlphaResult(sol.primal_value, sol.X, sol.y, sol.gap, sol, p)


def alpha(s: BankStrategy, pc: ProcessCone, cfg: Optional[SolverConfig] = None,
          verify_tol: float = 1e-6) -> AlphaResult:
    """Optimal forging probability over physical (subcausal) counterfeiters."""
    return _solve_money(s, pc, EFFECT_CONE, cfg, verify_tol)


def alpha_tilde(s: BankStrategy, pc: ProcessCone, cfg: Optional[SolverConfig] = None,
                verify_tol: float = 1e-6) -> AlphaResult:
    """Relaxed value; ``result.y`` is the dual state certificate with ``<u, y> = alpha_tilde``."""
    return _solve_money(s, pc, DUAL_STATE_CONE, cfg, verify_tol)


def normalised_Y(s: BankStrategy, y_cert, alpha_tilde_value: float, pc: Optional[ProcessCone] = None,
                 rng: Optional[np.random.Generator] = None, samples: int = 100,
                 tol: float = 1e-6) -> np.ndarray:
    """Functional ``Y`` on processes: feed the causal state ``y / alpha_tilde`` and discard.

    ``<Y, xi> = <u_AA, xi(y)> / alpha_tilde``.  Checks that ``y / alpha_tilde``
    is causal and, when ``pc`` is given, that ``alpha_tilde <Y, xi> >= <C, xi>``
    on random members ``xi`` of the process cone.
    """
    if not alpha_tilde_value > 0:
        raise ValueError("alpha_tilde must be positive")
    A = s.system
    y = np.asarray(y_cert, dtype=float).reshape(-1)
    if not A.state_cone.contains(y, tol):
        raise ValidationError("certificate is not in the state cone")
    u_AA = np.kron(A.unit_effect, A.unit_effect) if pc is None else pc.output.unit_effect
    ys = y / alpha_tilde_value
    if abs(float(A.unit_effect @ ys) - 1.0) > tol:
        raise CertificateError(f"normalised certificate state is not causal: <u, y>/alpha = {A.unit_effect @ ys:.12g}")
    Y = np.kron(ys, u_AA)
    if pc is not None:
        rng = rng or np.random.default_rng(0)
        C = build_verification_functional(s)
        xi = pc.sample(rng, samples)
        slack = alpha_tilde_value * (xi @ Y) - xi @ C
        scale = 1.0 + np.abs(xi @ C)
        if np.any(slack < -tol * scale):
            raise CertificateError(f"bound alpha_tilde <Y, xi> >= <C, xi> violated by {-slack.min():.3g}")
    return Y


def trivial_lower_bound(s: BankStrategy, tol: float = 1e-9):
    """``max_i p_i`` with the counterfeiter that ignores the note and prepares two copies of ``s_i``."""
    ps = s.probabilities
    i = int(np.argmax(ps))  # first maximum
    _, st, _ = s.items[i]
    chi = prepare_process(s.system.unit_effect, np.kron(st, st))
    val = success_probability(s, chi)
    if val < ps[i] - tol:
        raise ValidationError(f"trivial counterfeiter scores {val:.17g} < p_max = {ps[i]:.17g}")
    return float(ps[i]), chi


# ---------------------------------------------------------------------------
# verification sharpness and broadcasting


def _exposed_psd_face(A: System, g: np.ndarray, tol: float = 1e-9):
    """Face ``K ∩ g^perp`` of a PSD state cone as ``L(PSD(k))``, or None.

    Returns ``(L, cone)`` with ``L`` mapping coordinates of the smaller PSD
    cone to coordinates of ``A``.  Needs ``g`` itself PSD.
    """
    K = A.state_cone
    if not isinstance(K, PsdHermitian):
        return None
    G = K.to_matrix(g)
    w, V = np.linalg.eigh(G)
    if w.min() < -1e-7 * max(1.0, abs(w).max()):
        return None
    V = V[:, w <= tol * max(1.0, abs(w).max())]
    k = V.shape[1]
    if k == 0:
        return np.zeros((A.dim, 0)), None
    sub = PsdHermitian(k)
    basis = hermitian_basis(k)
    L = np.column_stack([K.from_matrix(V @ B @ V.conj().T) for B in basis])
    return L, sub


def check_VS(s: BankStrategy, cfg: Optional[SolverConfig] = None, tol: float = 1e-5) -> list:
    """For each item, whether ``e_i`` accepts with certainty only the state ``s_i``.

    The face ``{x in K : <u, x> <= 1, <e_i, x> >= 1}`` is a single point iff
    every coordinate has equal maximum and minimum over it.  On PSD state
    cones the program is posed on the face of ``K`` exposed by ``u - e_i``;
    otherwise the singleton face leaves no strictly feasible point and the
    splitting solver cannot converge.
    """
    A = s.system
    n = A.dim
    out = []
    for k, (_, st, e) in enumerate(s.items):
        reduced = _exposed_psd_face(A, A.unit_effect - e)
        if reduced is not None:
            L, sub = reduced
            if sub is None:
                raise ValidationError(f"item {k}: no state is accepted with certainty; strategy is corrupt")
            phi = LinearOperator(np.vstack([A.unit_effect @ L, -(e @ L)]))
            K2 = sub
        else:
            L = np.eye(n)
            phi = LinearOperator(np.vstack([A.unit_effect, -e]))
            K2 = A.state_cone
        b = np.array([1.0, -1.0])
        sharp = True
        for j in range(n):
            for sign in (1.0, -1.0):
                p = ConicProgram(sign * L[j], b, phi, Orthant(2), K2)
                sol = solve(p, cfg)
                if sol.status == PRIMAL_INFEASIBLE:
                    raise ValidationError(f"item {k}: no state is accepted with certainty; strategy is corrupt")
                if sol.status != OPTIMAL:
                    raise SolverError(f"sharpness program ended with status {sol.status}", sol)
                if abs(sol.primal_value - sign * st[j]) > tol:
                    sharp = False
                    break
            if not sharp:
                break
        out.append(sharp)
    return out


@dataclass(frozen=True)
class BroadcastReport:
    feasible: bool
    map_B: Optional[np.ndarray]
    certificate: Optional[np.ndarray]
    solution: Solution = field(repr=False)
    verified: bool = False


def broadcast_program(states: Sequence[np.ndarray], pc: ProcessCone) -> ConicProgram:
    """Feasibility program for a subcausal ``B`` whose two marginals reproduce each state."""
    out = pc.output
    A = pc.input
    if len(out.factors) != 2 or out.factors[0].dim != A.dim or out.factors[1].dim != A.dim:
        raise ValidationError("broadcasting needs a process cone A -> AA")
    n, nn = A.dim, out.dim
    uA = A.unit_effect
    # marginal operators on R^{nn}
    M1 = np.kron(np.eye(n), uA[None, :])
    M2 = np.kron(uA[None, :], np.eye(n))
    rows, rhs = [], []
    for st in states:
        st = np.asarray(st, dtype=float).reshape(-1)
        if st.shape[0] != n:
            raise ValidationError(f"state has length {st.shape[0]}, expected {n}")
        if not A.state_cone.contains(st, STRATEGY_TOL) or abs(float(uA @ st) - 1) > STRATEGY_TOL:
            raise ValidationError("broadcast states must be causal states of the input system")
        apply_op = np.kron(st[None, :], np.eye(nn))  # B -> B(s)
        rows += [M1 @ apply_op, M2 @ apply_op]
        rhs += [st, st]
    n_eq = 2 * n * len(states)
    phi = np.vstack(rows + [pc.unit_pullback_operator()])
    b = np.concatenate(rhs + [uA])
    K1 = Product([free_cone(n_eq), A.effect_cone.dual()])
    return ConicProgram(np.zeros(pc.dim), b, LinearOperator(phi), K1, pc.cone)


def check_broadcastable(states: Sequence[np.ndarray], pc: ProcessCone,
                        cfg: Optional[SolverConfig] = None, verify_tol: float = 1e-6) -> BroadcastReport:
    p = broadcast_program(states, pc)
    sol = solve(p, cfg)
    if sol.status == OPTIMAL:
        return BroadcastReport(True, sol.X, None, sol, verify_solution(p, sol, verify_tol))
    if sol.status == PRIMAL_INFEASIBLE:
        return BroadcastReport(False, None, sol.y, sol, verify_solution(p, sol, verify_tol))
    raise SolverError(f"broadcast program ended with status {sol.status}", sol)


@dataclass(frozen=True)
class EquivalenceReport:
    alpha: float
    perfect: bool
    broadcastable: bool
    consistent: bool
    complement_residual: float


def wnc_broadcast_equivalence(s: BankStrategy, pc: ProcessCone, cfg: Optional[SolverConfig] = None,
                              tol: float = 1e-4, vs: Optional[list] = None) -> EquivalenceReport:
    """Check that ``alpha = 1`` exactly when the strategy's states can be broadcast.

    Requires verification sharpness.  When both hold, the broadcast marginals
    are also checked to be rejected by every complementary effect ``u - e_i``.
    """
    vs = check_VS(s, cfg) if vs is None else vs
    if not all(vs):
        raise ValidationError("the equivalence needs verification sharpness for every item")
    a = alpha(s, pc, cfg).value
    br = check_broadcastable(s.states, pc, cfg)
    perfect = a >= 1.0 - tol
    resid = 0.0
    if br.feasible:
        u = s.system.unit_effect
        for _, st, e in s.items:
            out = pc.apply(br.map_B, st)
            for keep in (0, 1):
                resid = max(resid, float((u - e) @ marginalise(pc.output, out, keep)))
    return EquivalenceReport(a, perfect, br.feasible, perfect == br.feasible, resid)


# ---------------------------------------------------------------------------
# spanning, products, repetition


def make_spanning(s: BankStrategy, basis: Sequence[np.ndarray]) -> BankStrategy:
    """Half ``s``, half uniform over ``basis`` verified by the discarding effect."""
    A = s.system
    B = np.array([np.asarray(b, dtype=float).reshape(-1) for b in basis])
    if B.ndim != 2 or B.shape[1] != A.dim:
        raise ValidationError(f"basis states must have length {A.dim}")
    if np.linalg.matrix_rank(B) < A.dim:
        raise ValidationError("basis states do not span the state space")
    m = B.shape[0]
    items = [(0.5 * p, st, e) for p, st, e in s.items]
    items += [(0.5 / m, b, A.unit_effect.copy()) for b in B]
    mixed = BankStrategy(A, items, s.tol)
    assert mixed.is_spanning()
    return mixed


@dataclass(frozen=True)
class MixingReport:
    alpha_original: float
    alpha_mixed: float
    bound: float
    holds: bool


def verify_mixing_bound(s: BankStrategy, basis, pc: ProcessCone, cfg: Optional[SolverConfig] = None,
                        tol: float = 1e-4) -> MixingReport:
    mixed = make_spanning(s, basis)
    a0 = alpha(s, pc, cfg).value
    a1 = alpha(mixed, pc, cfg).value
    bound = 0.5 * (a0 + 1.0)
    return MixingReport(a0, a1, bound, a1 <= bound + tol)


def product_strategy(sa: BankStrategy, sb: BankStrategy, rule: str = "default",
                     system: Optional[System] = None) -> BankStrategy:
    """Independent product: items ``(p_i q_j, s_i (x) t_j, e_i (x) f_j)``."""
    AB = system if system is not None else compose_systems([sa.system, sb.system], rule)
    items = [(p * q, np.kron(s, t), np.kron(e, f))
             for p, s, e in sa.items for q, t, f in sb.items]
    total = sum(it[0] for it in items)
    items = [(p / total, s, e) for p, s, e in items]
    return BankStrategy(AB, items, max(sa.tol, sb.tol))


def _reduce_to_first(chi_AB: np.ndarray, nA: int, nB: int, state_b: np.ndarray,
                     eff_b1: np.ndarray, eff_b2: np.ndarray) -> np.ndarray:
    """Map on ``A``: feed ``state_b`` into ``B`` and apply effects on both ``B`` outputs."""
    T = chi_AB.reshape(nA, nB, nA, nB, nA, nB)
    return np.einsum("abcdef,b,d,f->ace", T, state_b, eff_b1, eff_b2).reshape(-1)


@dataclass(frozen=True)
class ProductBoundReport:
    alpha_AB: float
    alpha_tilde_A: float
    alpha_tilde_B: float
    bound: float
    holds: bool
    reductions_subcausal: bool


def verify_product_bound(sa: BankStrategy, sb: BankStrategy, pc_AB: Optional[ProcessCone] = None,
                         cfg: Optional[SolverConfig] = None, tol: float = 1e-3,
                         pc_A: Optional[ProcessCone] = None, pc_B: Optional[ProcessCone] = None,
                         max_dim: int = 5000, rule: str = "default") -> ProductBoundReport:
    """Check ``alpha_AB <= alpha_tilde_A * alpha_tilde_B`` and the reduction argument behind it.

    The optimal joint counterfeiter, with the ``B`` part closed off either by
    the ``B`` verification (prepare ``t_j``, test ``f_j (x) f_j``) or by
    the normalised certificate state of ``B`` followed by discarding, must
    be a subcausal counterfeiter for ``A``.
    """
    A, B = sa.system, sb.system
    pc_A = pc_A or counterfeit_cone(A, rule)
    pc_B = pc_B or counterfeit_cone(B, rule)
    s_ab = product_strategy(sa, sb, rule)
    if pc_AB is None:
        AB = s_ab.system
        pc_AB = ProcessCone(AB, compose_systems([AB, AB], rule))
    if pc_AB.dim > max_dim:
        raise ValidationError(f"composite program has dimension {pc_AB.dim} > cap {max_dim}")
    ta = alpha_tilde(sa, pc_A, cfg)
    tb = alpha_tilde(sb, pc_B, cfg)
    ab = alpha(s_ab, pc_AB, cfg)
    bound = ta.value * tb.value
    nA, nB = A.dim, B.dim
    chi = ab.chi
    ok = True
    red_tol = 1e-5
    # D = verification of B
    red = sum(q * _reduce_to_first(chi, nA, nB, t, f, f) for q, t, f in sb.items)
    ok &= pc_A.cone.contains(red, red_tol) and pc_A.is_subcausal(red, EFFECT_CONE, red_tol)
    # D = certificate state of B, then discard both B outputs
    yb = tb.y / tb.value
    red = _reduce_to_first(chi, nA, nB, yb, B.unit_effect, B.unit_effect)
    ok &= pc_A.cone.contains(red, red_tol) and pc_A.is_subcausal(red, EFFECT_CONE, red_tol)
    return ProductBoundReport(ab.value, ta.value, tb.value, bound, ab.value <= bound + tol, bool(ok))


def repetition_count(alpha_tilde_value: float, delta: float, tol: float = 1e-6) -> int:
    """Smallest ``n`` with ``alpha_tilde ** n <= delta``."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    a = float(alpha_tilde_value)
    if a >= 1.0 - tol:
        raise NoAmplificationError(
            "no security amplification possible: alpha_tilde = 1, so perfect counterfeiting is possible")
    if a <= 0:
        return 1
    n = max(1, math.ceil(math.log(delta) / math.log(a)))
    while n > 1 and a ** (n - 1) <= delta:
        n -= 1
    while a ** n > delta:
        n += 1
    return n


def repetition_security(s: BankStrategy, delta: float, pc: Optional[ProcessCone] = None,
                        cfg: Optional[SolverConfig] = None, alpha_tilde_value: Optional[float] = None,
                        tol: float = 1e-6) -> int:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if alpha_tilde_value is None:
        pc = pc or counterfeit_cone(s.system)
        alpha_tilde_value = alpha_tilde(s, pc, cfg).value
    return repetition_count(alpha_tilde_value, delta, tol)


# ---------------------------------------------------------------------------
# full report


@dataclass(frozen=True)
class SecurityReport:
    alpha: float
    alpha_tilde: float
    chi_opt: np.ndarray = field(repr=False)
    y_cert: np.ndarray = field(repr=False)
    gap: float
    slater: SlaterReport = field(repr=False)
    lower_bound: float
    alpha_result: AlphaResult = field(repr=False, default=None)
    alpha_tilde_result: AlphaResult = field(repr=False, default=None)

    @property
    def perfect_counterfeiting(self) -> bool:
        return self.alpha >= 1.0 - 1e-6


def analyse(s: BankStrategy, pc: Optional[ProcessCone] = None, cfg: Optional[SolverConfig] = None,
            tol: float = 1e-6) -> SecurityReport:
    pc = pc or counterfeit_cone(s.system)
    a = alpha(s, pc, cfg)
    at = alpha_tilde(s, pc, cfg)
    lb, _ = trivial_lower_bound(s)
    sl = check_slater(at.program, 1e-9)
    if not (lb <= a.value + tol <= at.value + 2 * tol <= 1 + 3 * tol):
        raise CertificateError(
            f"ordering lower bound <= alpha <= alpha_tilde <= 1 violated: "
            f"{lb:.12g}, {a.value:.12g}, {at.value:.12g}")
    return SecurityReport(a.value, at.value, a.chi, at.y, max(a.gap, at.gap), sl, lb, a, at)
