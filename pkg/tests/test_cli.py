import json

import numpy as np
import pytest

from gptmint import cli


def run_json(*argv):
    code, text, _ = cli.run(list(argv))
    return code, (json.loads(text) if text else None)


def test_solve_wiesner_report():
    code, doc = run_json("solve", "--theory", "quantum:2", "--strategy", "builtin:wiesner")
    assert code == 0
    assert doc["schema_version"] == cli.SCHEMA_VERSION
    assert set(doc) >= {"theory", "strategy", "config", "results", "inputs"}
    r = doc["results"]
    assert float(r["alpha"]["value"]) == pytest.approx(0.75, abs=1e-4)
    assert r["alpha"]["verified"] and r["alpha_tilde"]["verified"]
    assert r["warnings"] == []
    # numbers are 17-digit decimal strings
    assert isinstance(r["alpha"]["value"], str)


def test_solve_classical_warns(capsys):
    code, text, _ = cli.run(["solve", "--theory", "classical:2", "--strategy", "builtin:wiesner",
                             "--format", "text"])
    assert code == 0
    assert "perfect counterfeiting" in text


def test_relaxed_only():
    code, doc = run_json("solve", "--theory", "gbit", "--strategy", "builtin:wiesner", "--relaxed")
    assert code == 0 and "alpha" not in doc["results"]


def test_malformed_strategy_exit_code(tmp_path, capsys):
    path = tmp_path / "s.json"
    assert cli.main(["strategy", "--theory", "gbit", "--strategy", "builtin:wiesner", "--out", str(path)]) == 0
    doc = json.loads(path.read_text())
    doc["strategy"]["items"][0]["p"] = "0.5"
    path.write_text(json.dumps(doc))
    code, _, _ = cli.run(["solve", "--strategy", str(path)])
    assert code == cli.EXIT_INPUT
    assert "p_1, ..., p_n > 0" in capsys.readouterr().err


def test_unknown_theory_exit_code():
    code, _, _ = cli.run(["solve", "--theory", "torus:3", "--strategy", "builtin:wiesner"])
    assert code == cli.EXIT_INPUT


def test_solver_failure_exit_code():
    code, _, _ = cli.run(["solve", "--theory", "quantum:2", "--strategy", "builtin:wiesner",
                          "--max-iter", "3"])
    assert code == cli.EXIT_SOLVER


def test_strategy_file_round_trip(tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    cli.run(["strategy", "--theory", "polygon:6:restricted", "--strategy", "builtin:random",
             "--seed", "3", "--out", str(p1)])
    cli.run(["strategy", "--strategy", str(p1), "--seed", "3", "--out", str(p2)])
    assert json.loads(p1.read_text()) == json.loads(p2.read_text())
    th, s = cli.load_strategy(str(p2), None, 0)
    th0, s0 = cli.load_strategy("builtin:random", cli.by_name("polygon:6:restricted"), 3)
    for (p, st, e), (q, t, f) in zip(s.items, s0.items):
        assert p == q and np.array_equal(st, t) and np.array_equal(e, f)


def test_custom_theory_round_trip(tmp_path):
    V = [[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
    E = [[1, 0, 0], [-1, 0, 1], [0, 1, 0], [0, -1, 1]]
    doc = {"schema_version": 1, "theory": cli.encode({"name": "custom", "states": np.array(V, float),
                                                      "effects": np.array(E, float), "unit": np.array([0, 0, 1.0])})}
    path = tmp_path / "t.json"
    path.write_text(json.dumps(doc))
    th = cli.load_theory(str(path))
    assert cli.theory_to_dict(th) == doc["theory"]


def test_reports_are_reproducible():
    argv = ["solve", "--theory", "polygon:6", "--strategy", "builtin:random", "--seed", "9"]
    assert cli.run(argv)[1] == cli.run(argv)[1]


def test_broadcast_and_vs_and_repeat():
    code, doc = run_json("broadcast", "--theory", "quantum:2", "--states", "bb84")
    assert code == 0 and doc["results"]["broadcastable"] is False
    code, doc = run_json("broadcast", "--theory", "classical:3", "--states", "vertices")
    assert code == 0 and doc["results"]["broadcastable"] is True
    code, doc = run_json("vs", "--strategy", "builtin:wiesner")
    assert doc["results"]["all_sharp"]
    code, text, _ = cli.run(["repeat", "--strategy", "builtin:wiesner", "--delta", "1e-6", "--format", "text"])
    assert code == 0 and "n           : 49" in text


def test_repeat_classical_refuses():
    code, _, _ = cli.run(["repeat", "--theory", "classical:2", "--strategy", "builtin:wiesner", "--delta", "0.1"])
    assert code == cli.EXIT_INPUT


def test_product_command():
    code, doc = run_json("product", "--a", "builtin:wiesner", "--b", "builtin:wiesner")
    assert code == 0
    assert float(doc["results"]["bound"]) == pytest.approx(0.5625, abs=1e-3)
    assert doc["results"]["holds"]


def test_timings_flag():
    code, doc = run_json("solve", "--theory", "classical:2", "--strategy", "builtin:wiesner", "--timings")
    assert "timings" in doc
    code, doc = run_json("solve", "--theory", "classical:2", "--strategy", "builtin:wiesner")
    assert "timings" not in doc


def test_number_encoding_is_exact():
    x = np.array([0.1, 1 / 3, np.pi * 1e-9])
    back = np.array([float(v) for v in cli.encode(x)])
    assert np.array_equal(back, x)
