"""``gptmint`` command line: run counterfeiting analyses and write certified reports.

Files are single JSON documents with top-level keys ``schema_version``,
``theory``, ``strategy`` and ``config``.  Every real number is written as a
decimal string with 17 significant digits so that re-reading is exact.

Exit codes: 0 success, 2 input or validation error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from typing import Any, Optional, Sequence

import numpy as np

from .cone_geometry import PolyhedralV
from .conic_solver import SolverConfig, check_slater, verify_solution
from .errors import CertificateError, GptMintError, SolverError, ValidationError
from .gpt_model import POLYHEDRAL, System
from .money import (
    BankStrategy, NoAmplificationError, alpha, alpha_tilde, check_broadcastable, check_VS,
    product_strategy, repetition_count, trivial_lower_bound, verify_product_bound,
)
from .theories import TheoryDescriptor, bb84_kets, by_name, pure_state, random_strategy, wiesner_strategy

SCHEMA_VERSION = 1
DEFAULT_THEORY = "quantum:2"
EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3

log = logging.getLogger("gptmint")


class InputError(GptMintError):
    """Bad command-line input or unreadable file."""


# ---------------------------------------------------------------------------
# number and array encoding


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def encode(obj: Any) -> Any:
    """Recursively turn floats and arrays into decimal strings."""
    if isinstance(obj, dict):
        return {k: encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    return obj


def decode_array(data) -> np.ndarray:
    try:
        return np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"not a numeric array: {exc}") from exc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def digest(doc: Any) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# ---------------------------------------------------------------------------
# theories and strategies


def theory_to_dict(th: TheoryDescriptor) -> dict:
    if th.name == "custom":
        return encode({
            "name": "custom",
            "states": th.system.state_cone.generators(),
            "effects": th.system.effect_cone.generators(),
            "unit": th.system.unit_effect,
        })
    return {"ref": th.ref}


def theory_from_dict(d: dict) -> TheoryDescriptor:
    if not isinstance(d, dict):
        raise InputError("theory entry must be an object")
    if "ref" in d:
        return by_name(str(d["ref"]))
    if d.get("name") == "custom":
        try:
            V = decode_array(d["states"])
            E = decode_array(d["effects"])
            u = decode_array(d["unit"])
        except KeyError as exc:
            raise InputError(f"custom theory is missing {exc}") from None
        sys_ = System("custom", PolyhedralV(V), PolyhedralV(E), u, POLYHEDRAL)
        return TheoryDescriptor("custom", {}, sys_, extremal_states=V)
    raise InputError("theory entry needs either 'ref' or name 'custom'")


def load_theory(arg: str) -> TheoryDescriptor:
    """``arg`` is a theory reference such as ``quantum:2`` or a JSON file path."""
    if os.path.isfile(arg):
        doc = read_document(arg)
        return theory_from_dict(doc.get("theory", doc))
    return by_name(arg)


def strategy_to_dict(s: BankStrategy) -> dict:
    return encode({"items": [{"p": p, "state": st, "effect": e} for p, st, e in s.items]})


def strategy_from_dict(d: dict, system: System) -> BankStrategy:
    items = d.get("items") if isinstance(d, dict) else None
    if not isinstance(items, list):
        raise InputError("strategy entry needs an 'items' list")
    triples = []
    for k, it in enumerate(items):
        try:
            triples.append((float(it["p"]), decode_array(it["state"]), decode_array(it["effect"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"strategy item {k} is malformed: {exc}") from None
    return BankStrategy(system, triples)


def read_document(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    ver = doc.get("schema_version", SCHEMA_VERSION)
    if ver != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema_version {ver!r}")
    return doc


def builtin_strategy(name: str, th: TheoryDescriptor, seed: int) -> BankStrategy:
    if name == "wiesner":
        return wiesner_strategy(th)
    if name == "single":
        w = wiesner_strategy(th)
        _, st, e = w.items[0]
        return BankStrategy(th.system, [(1.0, st, e)])
    if name == "random":
        return random_strategy(th, np.random.default_rng(seed))
    raise InputError(f"unknown builtin strategy {name!r} (use wiesner, single or random)")


def load_strategy(arg: str, th: Optional[TheoryDescriptor], seed: int):
    """Return ``(theory, strategy)``.  A strategy file may carry its own theory."""
    if arg.startswith("builtin:"):
        th = th or by_name(DEFAULT_THEORY)
        return th, builtin_strategy(arg.split(":", 1)[1], th, seed)
    if not os.path.isfile(arg):
        raise InputError(f"strategy {arg!r} is neither builtin:<name> nor a file")
    doc = read_document(arg)
    if "theory" in doc:
        file_th = theory_from_dict(doc["theory"])
        if th is not None and theory_to_dict(th) != theory_to_dict(file_th):
            raise InputError(f"strategy file is for theory {file_th.ref}, not {th.ref}")
        th = file_th
    if th is None:
        raise InputError("strategy file has no theory entry; pass --theory")
    return th, strategy_from_dict(doc.get("strategy", doc), th.system)


def load_states(arg: str, th: TheoryDescriptor, seed: int) -> list:
    if arg == "bb84":
        if th.name != "quantum" or th.params["d"] != 2:
            raise InputError("the bb84 states live in quantum:2")
        K = th.system.state_cone
        return [pure_state(K, k) for k in bb84_kets()]
    if arg == "vertices":
        if th.extremal_states is None:
            raise InputError(f"theory {th.ref} has no recorded extremal states")
        return list(th.extremal_states)
    _, s = load_strategy(arg, th, seed)
    return s.states


# ---------------------------------------------------------------------------
# commands


def _config(args) -> SolverConfig:
    return SolverConfig(eps_abs=args.tol, eps_rel=args.tol, max_iter=args.max_iter, seed=args.seed)


def _config_dict(cfg: SolverConfig) -> dict:
    return encode({"eps_abs": cfg.eps_abs, "eps_rel": cfg.eps_rel, "max_iter": cfg.max_iter,
                   "seed": cfg.seed, "method": cfg.method})


def _diag(sol) -> dict:
    return encode({"status": sol.status, "method": sol.method, "iterations": sol.iterations,
                   "gap": sol.gap, "residuals": dict(sorted(sol.residuals.items()))})


class _Clock:
    def __init__(self):
        self.times = {}

    def run(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.times[name] = time.perf_counter() - t0


def _alpha_block(res) -> dict:
    # alpha / alpha_tilde raise unless the solution re-verifies
    return {
        "value": fmt(res.value),
        "dual_value": fmt(res.dual_value),
        "certificate_y": encode(res.y),
        "verified": bool(verify_solution(res.program, res.solution)),
        "diagnostics": _diag(res.solution),
    }


def cmd_solve(args, clock: _Clock) -> dict:
    th = load_theory(args.theory) if args.theory else None
    th, s = load_strategy(args.strategy, th, args.seed)
    cfg = _config(args)
    pc = th.counterfeit_cone()
    out: dict = {"theory": theory_to_dict(th), "strategy": strategy_to_dict(s), "config": _config_dict(cfg)}
    res: dict = {}
    lb, _ = trivial_lower_bound(s)
    res["trivial_lower_bound"] = fmt(lb)
    if not args.relaxed:
        a = clock.run("alpha", alpha, s, pc, cfg)
        res["alpha"] = _alpha_block(a)
    at = clock.run("alpha_tilde", alpha_tilde, s, pc, cfg)
    res["alpha_tilde"] = _alpha_block(at)
    sl = clock.run("slater", check_slater, at.program, 1e-9)
    res["slater"] = {"primal_strict": sl.primal_strict, "dual_strict": sl.dual_strict}
    top = at.value if args.relaxed else res_value(res, "alpha")
    warnings = []
    if top >= 1.0 - 10 * cfg.tolerance:
        warnings.append("perfect counterfeiting: the forging probability is 1")
    res["warnings"] = warnings
    out["results"] = res
    return out


def res_value(res: dict, key: str) -> float:
    return float(res[key]["value"])


def cmd_broadcast(args, clock: _Clock) -> dict:
    th = load_theory(args.theory or DEFAULT_THEORY)
    states = load_states(args.states, th, args.seed)
    cfg = _config(args)
    rep = clock.run("broadcast", check_broadcastable, states, th.counterfeit_cone(), cfg)
    if not rep.verified:
        raise CertificateError("broadcast verdict failed independent re-verification", rep.solution)
    return {
        "theory": theory_to_dict(th),
        "states": encode(states),
        "config": _config_dict(cfg),
        "results": {
            "broadcastable": rep.feasible,
            "verified": rep.verified,
            "map": encode(rep.map_B) if rep.feasible else None,
            "certificate": None if rep.feasible else encode(rep.certificate),
            "diagnostics": _diag(rep.solution),
        },
    }


def cmd_vs(args, clock: _Clock) -> dict:
    th = load_theory(args.theory) if args.theory else None
    th, s = load_strategy(args.strategy, th, args.seed)
    cfg = _config(args)
    table = clock.run("vs", check_VS, s, cfg)
    return {
        "theory": theory_to_dict(th),
        "strategy": strategy_to_dict(s),
        "config": _config_dict(cfg),
        "results": {"vs": [bool(v) for v in table], "all_sharp": bool(all(table))},
    }


def cmd_product(args, clock: _Clock) -> dict:
    th = load_theory(args.theory) if args.theory else None
    th_a, sa = load_strategy(args.a, th, args.seed)
    th_b, sb = load_strategy(args.b, th, args.seed + 1)
    cfg = _config(args)
    pc_a, pc_b = th_a.counterfeit_cone(), th_b.counterfeit_cone()
    prod = product_strategy(sa, sb, th_a.rule)
    pc_ab = th_a.counterfeit_cone(prod.system) if th_a.name == th_b.name else None
    rep = clock.run("product", verify_product_bound, sa, sb, pc_ab, cfg,
                    pc_A=pc_a, pc_B=pc_b, max_dim=args.max_dim, rule=th_a.rule)
    return {
        "theory": {"a": theory_to_dict(th_a), "b": theory_to_dict(th_b)},
        "strategy": {"a": strategy_to_dict(sa), "b": strategy_to_dict(sb)},
        "config": _config_dict(cfg),
        "results": encode({
            "alpha_AB": rep.alpha_AB,
            "alpha_tilde_A": rep.alpha_tilde_A,
            "alpha_tilde_B": rep.alpha_tilde_B,
            "bound": rep.bound,
            "holds": rep.holds,
            "reductions_subcausal": rep.reductions_subcausal,
        }),
    }


def cmd_repeat(args, clock: _Clock) -> dict:
    th = load_theory(args.theory) if args.theory else None
    th, s = load_strategy(args.strategy, th, args.seed)
    cfg = _config(args)
    if not 0 < args.delta < 1:
        raise InputError("--delta must lie in (0, 1)")
    at = clock.run("alpha_tilde", alpha_tilde, s, th.counterfeit_cone(), cfg)
    n = repetition_count(at.value, args.delta)
    return {
        "theory": theory_to_dict(th),
        "strategy": strategy_to_dict(s),
        "config": _config_dict(cfg),
        "results": {
            "delta": fmt(args.delta),
            "alpha_tilde": _alpha_block(at),
            "n": n,
            "bound": fmt(at.value ** n),
        },
    }


def cmd_strategy(args, clock: _Clock) -> dict:
    """Write a strategy file (builtin strategies become explicit item lists)."""
    th = load_theory(args.theory) if args.theory else None
    th, s = load_strategy(args.strategy, th, args.seed)
    return {"theory": theory_to_dict(th), "strategy": strategy_to_dict(s),
            "config": _config_dict(_config(args))}


COMMANDS = {
    "solve": cmd_solve, "broadcast": cmd_broadcast, "vs": cmd_vs,
    "product": cmd_product, "repeat": cmd_repeat, "strategy": cmd_strategy,
}


# ---------------------------------------------------------------------------
# text rendering


def render_text(command: str, doc: dict) -> str:
    r = doc.get("results", {})
    lines = [f"gptmint {command}"]
    if command == "solve":
        lines.append(f"  trivial lower bound : {r['trivial_lower_bound']}")
        if "alpha" in r:
            lines.append(f"  alpha               : {r['alpha']['value']}  (dual {r['alpha']['dual_value']}, "
                         f"verified {r['alpha']['verified']})")
        lines.append(f"  alpha_tilde         : {r['alpha_tilde']['value']}  (dual {r['alpha_tilde']['dual_value']}, "
                     f"verified {r['alpha_tilde']['verified']})")
        lines.append(f"  slater              : primal {r['slater']['primal_strict']}, dual {r['slater']['dual_strict']}")
        for w in r["warnings"]:
            lines.append(f"  warning: {w}")
    elif command == "broadcast":
        lines.append(f"  broadcastable : {r['broadcastable']}  (verified {r['verified']})")
    elif command == "vs":
        for k, v in enumerate(r["vs"]):
            lines.append(f"  item {k}: {'sharp' if v else 'not sharp'}")
    elif command == "product":
        lines.append(f"  alpha_AB                  : {r['alpha_AB']}")
        lines.append(f"  alpha_tilde_A*alpha_tilde_B : {r['bound']}")
        lines.append(f"  bound holds               : {r['holds']}")
        lines.append(f"  reductions subcausal      : {r['reductions_subcausal']}")
    elif command == "repeat":
        lines.append(f"  alpha_tilde : {r['alpha_tilde']['value']}")
        lines.append(f"  n           : {r['n']}")
        lines.append(f"  alpha_tilde^n = {r['bound']} <= delta = {r['delta']}")
    elif command == "strategy":
        lines.append(f"  {len(doc['strategy']['items'])} items for theory {doc['theory']}")
    if "timings" in doc:
        for k, v in sorted(doc["timings"].items()):
            lines.append(f"  time {k}: {v} s")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--theory", help="default quantum:2; theory reference (quantum:2, classical:3, gbit, polygon:6[:restricted]) or file")
    common.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
    common.add_argument("--max-iter", type=int, default=200_000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")
    common.add_argument("--timings", action="store_true", help="include wall-clock times (breaks byte-identity)")

    p = argparse.ArgumentParser(prog="gptmint", description="Counterfeiting analysis of GPT money schemes.")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("solve", parents=[common], help="alpha, alpha_tilde and certificates")
    sp.add_argument("--strategy", required=True, help="builtin:wiesner|single|random or a strategy file")
    sp.add_argument("--relaxed", action="store_true", help="compute alpha_tilde only")
    sp = sub.add_parser("broadcast", parents=[common], help="can these states be broadcast?")
    sp.add_argument("--states", required=True, help="bb84, vertices, builtin:<name> or a strategy file")
    sp = sub.add_parser("vs", parents=[common], help="verification sharpness table")
    sp.add_argument("--strategy", required=True)
    sp = sub.add_parser("product", parents=[common], help="product-strategy bound")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--max-dim", type=int, default=5000, help="cap on the composite program dimension")
    sp = sub.add_parser("repeat", parents=[common], help="copies needed for forging probability <= delta")
    sp.add_argument("--strategy", required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp = sub.add_parser("strategy", parents=[common], help="write a strategy file")
    sp.add_argument("--strategy", required=True)
    return p


def _setup_logging() -> None:
    level = os.environ.get("GPTMINT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run(argv: Optional[Sequence[str]] = None) -> tuple:
    """Execute a command; returns ``(exit_code, report_text, out_path)``.  Errors go to stderr."""
    _setup_logging()
    args = build_parser().parse_args(argv)
    clock = _Clock()
    try:
        body = COMMANDS[args.command](args, clock)
    except (InputError, ValidationError, NoAmplificationError, ValueError) as exc:
        print(f"gptmint: error: {exc}", file=sys.stderr)
        return EXIT_INPUT, "", None
    except (SolverError, CertificateError) as exc:
        print(f"gptmint: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER, "", None
    doc = {"schema_version": SCHEMA_VERSION, "command": args.command}
    doc.update(body)
    for key in ("theory", "strategy", "states"):
        if key in body:
            doc.setdefault("inputs", {})[key + "_sha256"] = digest(body[key])
    if args.timings:
        doc["timings"] = {k: "%.3f" % v for k, v in clock.times.items()}
    text = dumps(doc) if args.format == "json" else render_text(args.command, doc)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK, text, args.out


def main(argv: Optional[Sequence[str]] = None) -> int:
    code, text, out = run(argv)
    if text and out is None:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
