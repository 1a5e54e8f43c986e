"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in an "acceptance
criteria" section at the end of the run.  Tolerances are fixed here and are
never relaxed to make a check pass.
"""

import math
import re
import time

import numpy as np

from gptmint import cli
from gptmint.cone_geometry import (
    DualOf, Orthant, PolyhedralH, PolyhedralV, Product, PsdHermitian, TensorMax, TensorMin,
)
from gptmint.conic_solver import (
    OPTIMAL, PRIMAL_INFEASIBLE, UNBOUNDED, ConicProgram, LinearOperator,
    brute_force_polyhedral, check_slater, solve, verify_solution,
)
from gptmint.money import (
    BankStrategy, alpha, alpha_tilde, check_broadcastable, check_VS, repetition_security,
    trivial_lower_bound, verify_mixing_bound, verify_product_bound, wnc_broadcast_equivalence,
)
from gptmint.theories import (
    classical, gbit, polygon, pure_state, quantum, random_strategy, wiesner_strategy,
)

SHIPPED = [classical(2), classical(3), quantum(2), gbit(), polygon(5), polygon(6),
           polygon(5, restricted_effects=True), polygon(6, restricted_effects=True)]


# 1 ---------------------------------------------------------------------------

def test_classical_dichotomy(criterion):
    with criterion(1, "classical strategies are perfectly forgeable and broadcastable") as info:
        for n in (2, 3):
            th = classical(n)
            s = BankStrategy(th.system, [(1.0 / n, v, v) for v in np.eye(n)])
            t0 = time.perf_counter()
            pc = th.counterfeit_cone()
            a = alpha(s, pc).value
            br = check_broadcastable(s.states, pc)
            dt = time.perf_counter() - t0
            info[f"alpha_C{n}"] = f"{a:.9f}"
            info[f"time_C{n}"] = f"{dt:.3f}s"
            assert abs(a - 1.0) <= 1e-6
            assert br.feasible and br.verified
            assert dt < 1.0


# 2 ---------------------------------------------------------------------------

def test_quantum_wiesner(criterion):
    with criterion(2, "Wiesner qubit: alpha = alpha_tilde = 0.75 with verified certificate") as info:
        t0 = time.perf_counter()
        th = quantum(2)
        s = wiesner_strategy(th)
        pc = th.counterfeit_cone()
        a = alpha(s, pc)
        at = alpha_tilde(s, pc)
        dt = time.perf_counter() - t0
        info.update(alpha=f"{a.value:.9f}", alpha_tilde=f"{at.value:.9f}",
                    dual=f"{at.dual_value:.9f}", time=f"{dt:.2f}s")
        assert abs(a.value - 0.75) <= 1e-4 and abs(at.value - 0.75) <= 1e-4
        assert verify_solution(a.program, a.solution) and verify_solution(at.program, at.solution)
        assert abs(at.dual_value - at.value) <= 1e-4
        # dual point oracle 3I/8, explicit cloner oracle value 3/4 (see test_money)
        assert np.allclose(th.system.state_cone.to_matrix(at.y), 3 * np.eye(2) / 8, atol=1e-4)
        assert dt < 30.0


# 3 ---------------------------------------------------------------------------

def test_product_bound(criterion):
    with criterion(3, "Wiesner x Wiesner: alpha_AA = 0.5625 <= alpha_tilde^2") as info:
        t0 = time.perf_counter()
        s = wiesner_strategy(quantum(2))
        rep = verify_product_bound(s, s)
        dt = time.perf_counter() - t0
        info.update(alpha_AA=f"{rep.alpha_AB:.9f}", bound=f"{rep.bound:.9f}", time=f"{dt:.2f}s")
        assert abs(rep.alpha_AB - 0.5625) <= 1e-3
        assert rep.alpha_AB <= rep.alpha_tilde_A * rep.alpha_tilde_B + 1e-3
        assert rep.reductions_subcausal
        assert dt < 600.0


# 4 ---------------------------------------------------------------------------

def test_repetition(criterion):
    with criterion(4, "repetition: n = 49 for delta = 1e-6, certified bound printed") as info:
        s = wiesner_strategy(quantum(2))
        n = repetition_security(s, 1e-6)
        code, text, _ = cli.run(["repeat", "--strategy", "builtin:wiesner", "--delta", "1e-6",
                                 "--format", "text"])
        found = re.search(r"alpha_tilde\^n = (\S+) <= delta", text)
        bound = float(found.group(1))
        info.update(n=n, bound=f"{bound:.3e}")
        assert n == 49 and code == 0 and "n           : 49" in text
        assert bound <= 1e-6


# 5 ---------------------------------------------------------------------------

def test_lower_bound(criterion):
    with criterion(5, "alpha >= max_i p_i on 10 random strategies per shipped theory") as info:
        worst = math.inf
        for k, th in enumerate(SHIPPED):
            rng = np.random.default_rng(100 + k)
            pc = th.counterfeit_cone()
            for _ in range(10):
                s = random_strategy(th, rng, sharp=bool(rng.random() < 0.7))
                lb, _ = trivial_lower_bound(s)
                worst = min(worst, alpha(s, pc).value - lb)
        info["min(alpha - p_max)"] = f"{worst:.3e}"
        assert worst >= -1e-6


# 6 ---------------------------------------------------------------------------

def _feasible_samples(p: ConicProgram, pc, rng, count):
    """Process-cone samples scaled into the feasible region."""
    K1s = p.K1.dual()
    out = []
    for X in pc.sample(rng, count):
        lo, hi = 0.0, 1.0
        while K1s.contains(p.b - p.phi(hi * X), 0.0) and hi < 1e6:
            hi *= 2
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if K1s.contains(p.b - p.phi(mid * X), 0.0):
                lo = mid
            else:
                hi = mid
        out.append(lo * X)
    return out


def test_duality(criterion):
    with criterion(6, "strong duality where Slater holds, weak duality on feasible samples") as info:
        rng = np.random.default_rng(6)
        instances = [(th, wiesner_strategy(th)) for th in (classical(2), quantum(2), gbit(), polygon(6),
                                                            polygon(6, restricted_effects=True))]
        instances += [(th, random_strategy(th, rng)) for th in SHIPPED]
        strict = 0
        worst_gap = 0.0
        worst_weak = -math.inf
        for th, s in instances:
            pc = th.counterfeit_cone()
            for fn in (alpha, alpha_tilde):
                res = fn(s, pc)
                sl = check_slater(res.program, 1e-9)
                if sl.primal_strict and sl.dual_strict:
                    strict += 1
                    worst_gap = max(worst_gap, abs(res.solution.primal_value - res.solution.dual_value))
                    assert verify_solution(res.program, res.solution)
                by = float(res.program.b @ res.y)
                samples = _feasible_samples(res.program, pc, rng, 5) + [trivial_lower_bound(s)[1]]
                for X in samples:
                    worst_weak = max(worst_weak, float(res.program.C @ X) - by)
        info.update(strict_instances=strict, max_gap=f"{worst_gap:.2e}", max_weak_violation=f"{worst_weak:.2e}")
        assert strict > 0
        assert worst_gap <= 1e-6
        assert worst_weak <= 1e-8


# 7 ---------------------------------------------------------------------------

def test_wnc_broadcast_equivalence(criterion):
    with criterion(7, "alpha = 1 iff broadcastable on 20 random VS strategies (polygon 5, gbit)") as info:
        disagreements = 0
        tested = 0
        for k, th in enumerate((polygon(5), gbit())):
            rng = np.random.default_rng(700 + k)
            pc = th.counterfeit_cone()
            count = 0
            while count < 20:
                s = random_strategy(th, rng)
                vs = check_VS(s)
                if not all(vs):
                    continue
                rep = wnc_broadcast_equivalence(s, pc, vs=vs)
                disagreements += int(not rep.consistent)
                count += 1
            tested += count
        info.update(tested=tested, disagreements=disagreements)
        assert disagreements == 0


# 8 ---------------------------------------------------------------------------

def test_mixing_bound(criterion):
    with criterion(8, "spanning mixture: alpha(mixed) <= (alpha + 1)/2") as info:
        rng = np.random.default_rng(8)
        worst = -math.inf
        q = quantum(2)
        K = q.system.state_cone
        r = 1 / np.sqrt(2)
        qbasis = [pure_state(K, v) for v in ([1, 0], [0, 1], [r, r], [r, 1j * r])]
        theories = [gbit(), polygon(5), polygon(6), q]
        for i in range(10):
            th = theories[i % len(theories)]
            s = random_strategy(th, rng)
            basis = qbasis if th is q else th.extremal_states[:3]
            rep = verify_mixing_bound(s, basis, th.counterfeit_cone())
            worst = max(worst, rep.alpha_mixed - rep.bound)
        info["max(alpha_mixed - bound)"] = f"{worst:.3e}"
        assert worst <= 1e-4


# 9 ---------------------------------------------------------------------------

def _geometry_variants():
    ang = 2 * np.pi * np.arange(5) / 5
    pent = PolyhedralV(np.column_stack([np.cos(ang), np.sin(ang), np.ones(5)]))
    sq = gbit().system.state_cone
    return {
        "orthant": Orthant(5),
        "psd2": PsdHermitian(2),
        "psd3": PsdHermitian(3),
        "choi_2x2": PsdHermitian(factors=(2, 2), transposed=(True, False)),
        "polyV": pent,
        "polyH": pent.dual(),
        "product": Product([Orthant(2), PsdHermitian(2)]),
        "tensor_min": TensorMin(sq, sq),
        "tensor_max": TensorMax(sq.dual(), sq.dual()),
        "dual_of": DualOf(PsdHermitian(2)),
    }


def test_geometry(criterion):
    with criterion(9, "Moreau, idempotence and double dual on 1000 vectors per cone") as info:
        rng = np.random.default_rng(9)
        worst = {"moreau": 0.0, "idempotence": 0.0, "double_dual": 0.0}
        for name, K in _geometry_variants().items():
            Kd, Kdd = K.dual(), K.dual().dual()
            for _ in range(1000):
                x = rng.normal(size=K.dim) * rng.choice([0.1, 1.0, 10.0])
                p = K.project(x)
                q = Kd.project(-x)
                scale = 1.0 + np.linalg.norm(x)
                worst["moreau"] = max(worst["moreau"], np.linalg.norm(p - q - x) / scale,
                                      abs(p @ q) / scale ** 2)
                worst["idempotence"] = max(worst["idempotence"], np.linalg.norm(K.project(p) - p) / scale)
                worst["double_dual"] = max(worst["double_dual"], np.linalg.norm(Kdd.project(x) - p) / scale)
        info.update({k: f"{v:.1e}" for k, v in worst.items()})
        assert all(v <= 1e-8 for v in worst.values())


# 10 --------------------------------------------------------------------------

def _random_cone(rng, n, pointed):
    kind = rng.integers(0, 3 if not pointed else 2)
    if kind == 0:
        return Orthant(n)
    if kind == 1:
        g = rng.normal(size=(n + int(rng.integers(0, 3)), n))
        g[:, 0] = np.abs(g[:, 0]) + 0.5   # keeps the cone pointed
        return PolyhedralV(g)
    return PolyhedralH(rng.normal(size=(n + int(rng.integers(0, 2)), n)))


def test_solver_oracle(criterion):
    with criterion(10, "solver agrees with brute force on 50 polyhedral programs") as info:
        rng = np.random.default_rng(10)
        worst = 0.0
        statuses = {}
        for _ in range(50):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 7 - n))
            p = ConicProgram(rng.normal(size=n), rng.normal(size=m) + 0.5,
                             LinearOperator(rng.normal(size=(m, n))),
                             _random_cone(rng, m, pointed=False), _random_cone(rng, n, pointed=True))
            ref = brute_force_polyhedral(p)
            sol = solve(p)
            statuses[sol.status] = statuses.get(sol.status, 0) + 1
            if math.isinf(ref):
                assert sol.status == (UNBOUNDED if ref > 0 else PRIMAL_INFEASIBLE)
                assert verify_solution(p, sol)
            else:
                assert sol.status == OPTIMAL
                worst = max(worst, abs(sol.primal_value - ref))
        info.update(max_error=f"{worst:.1e}", statuses=statuses)
        assert worst <= 1e-6


# 11 --------------------------------------------------------------------------

def test_relaxation_nontrivial(criterion):
    with criterion(11, "some restricted polygon instance has alpha_tilde - alpha > 1e-3") as info:
        best = (-math.inf, None)
        for n in (4, 5, 6, 7, 8):
            th = polygon(n, restricted_effects=True)
            pc = th.counterfeit_cone()
            rng = np.random.default_rng(1100 + n)
            strategies = [random_strategy(th, rng, sharp=bool(i % 2)) for i in range(10)]
            if n % 2 == 0:
                strategies.append(wiesner_strategy(th))
            for j, s in enumerate(strategies):
                gap = alpha_tilde(s, pc).value - alpha(s, pc).value
                if gap > best[0]:
                    best = (gap, f"polygon:{n}:restricted#{j}")
        info.update(max_gap=f"{best[0]:.2e}", instance=best[1])
        assert best[0] > 1e-3
