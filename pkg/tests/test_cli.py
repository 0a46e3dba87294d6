import io
import json
import re
import subprocess
import sys

import pytest

from bddsolve.cli import main
from bddsolve.model import parse_lp, write_lp
from bddsolve.testkit import mrf_instance

SMALL = """\
Minimize
 obj: - 2 x + y - z
Subject To
 pick: x + y + z = 1
 cap: x + y <= 1
Binary
 x y z
End
"""

SIMPLEX = """\
Minimize
 obj: x1 + 2 x2 + 3 x3
Subject To
 sum: x1 + x2 + x3 = 1
Binary
 x1 x2 x3
End
"""

INFEASIBLE = """\
Minimize
 obj: x
Subject To
 up: x >= 1
 down: x <= 0
Binary
 x
End
"""


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.lp"
    path.write_text(SMALL)
    return str(path)


def test_solve_writes_json_report(small_file, capsys):
    code = main(["solve", small_file])
    captured = capsys.readouterr()
    assert code == 0
    payload = json.loads(captured.out)
    assert payload["instance"] == "small"
    assert payload["variables"] == 3
    assert payload["constraints"] == 2
    assert payload["status"] == "solved"
    assert payload["solution"] == {"x": 1, "y": 0, "z": 0}
    assert payload["upper_bound"] == -2.0
    assert payload["objective_exact"] == "-2"
    assert payload["lower_bound"] <= -2.0 + 1e-9
    assert "solution found" in captured.err


def test_unit_simplex_bounds_meet(tmp_path, capsys):
    path = tmp_path / "simplex.lp"
    path.write_text(SIMPLEX)
    code = main(["solve", str(path)])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["upper_bound"] == 1.0
    assert abs(payload["lower_bound"] - 1.0) <= 1e-6
    assert payload["solution"] == {"x1": 1, "x2": 0, "x3": 0}


def test_input_flag_matches_positional(small_file, capsys):
    code = main(["solve", "-i", small_file])
    first = json.loads(capsys.readouterr().out)
    assert code == 0
    code = main(["solve", small_file])
    second = json.loads(capsys.readouterr().out)
    assert code == 0
    assert {k: v for k, v in first.items() if not k.endswith("_ms")} == \
           {k: v for k, v in second.items() if not k.endswith("_ms")}
    assert main(["solve", small_file, "-i", "/other.lp"]) == 1
    assert main(["solve"]) == 1


def test_zero_passes_reports_initial_bound(small_file, capsys):
    code = main(["solve", small_file, "--max-passes", "0"])
    payload = json.loads(capsys.readouterr().out)
    assert code in (0, 3)
    assert payload["passes"] == 0
    assert payload["lower_bound"] is not None


def test_solve_infeasible_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.lp"
    path.write_text(INFEASIBLE)
    code = main(["solve", str(path)])
    captured = capsys.readouterr()
    assert code == 2
    payload = json.loads(captured.out)
    assert payload["status"] == "infeasible"
    assert payload["termination"] == "infeasible"
    assert payload["lower_bound"] is None
    assert payload["upper_bound"] is None
    assert payload["solution"] is None
    assert "infeasible" in captured.err


def test_budget_exhaustion_exit_code(tmp_path, capsys):
    path = tmp_path / "grid.lp"
    path.write_text(write_lp(mrf_instance(2, 2, 2, seed=1)))
    code = main(["solve", str(path), "--node-budget", "1"])
    captured = capsys.readouterr()
    assert code == 3
    payload = json.loads(captured.out)
    assert payload["status"] == "dual_only"
    assert payload["solution"] is None
    assert payload["lower_bound"] is not None


def test_parse_error_exit_code(tmp_path, capsys):
    path = tmp_path / "broken.lp"
    path.write_text("Maximize\n obj: x\nEnd\n")
    code = main(["solve", str(path)])
    captured = capsys.readouterr()
    assert code == 1
    assert captured.out == ""
    assert "parse error" in captured.err


def test_missing_file_exit_code(capsys):
    code = main(["solve", "/nonexistent/nowhere.lp"])
    assert code == 1
    assert "bddsolve:" in capsys.readouterr().err


def test_usage_errors_and_help(capsys):
    assert main([]) == 1
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main(["solve", "--help"]) == 0
    out = capsys.readouterr().out
    assert "--node-budget" in out and "--primal-order" in out


def test_reads_stdin(monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO(SMALL))
    code = main(["solve", "-"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["instance"] == "stdin"
    assert payload["status"] == "solved"


def test_option_spellings_accepted(small_file, capsys):
    code = main(["solve", small_file, "--tol", "0", "--max-passes", "8",
                 "--order", "cuthill-mckee", "--primal-order", "reduction",
                 "--averaging", "srmp", "--smoothing", "0.2"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["passes"] == 8
    assert payload["status"] == "solved"


def test_dump_bdd_prints_dot(small_file, capsys):
    code = main(["solve", small_file, "--dump-bdd", "pick"])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out.startswith("digraph")
    code = main(["solve", small_file, "--dump-bdd", "nosuchrow"])
    captured = capsys.readouterr()
    assert code == 1
    assert captured.out == ""


def test_trace_file(small_file, tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    code = main(["solve", small_file, "--max-passes", "6", "--tol", "0",
                 "--trace", str(trace)])
    capsys.readouterr()
    assert code == 0
    lines = [json.loads(l) for l in trace.read_text().splitlines()]
    assert len(lines) == 6
    assert {l["direction"] for l in lines} == {"fw", "bw"}
    assert all(set(l) == {"pass", "direction", "lb", "time_ms"} for l in lines)
    passes = [l["pass"] for l in lines]
    assert passes == sorted(passes)
    bounds = [l["lb"] for l in lines]
    assert all(b >= a - 1e-9 for a, b in zip(bounds, bounds[1:]))


def test_generate_kinds(capsys):
    expected = {
        ("generate", "random_ilp", "--vars", "6", "--cons", "4", "--seed", "3"): (6, 4),
        ("generate", "mrf", "--nodes", "3", "--labels", "2", "--seed", "0"): (14, 13),
        ("generate", "matching", "--size", "2", "--seed", "1"): (8, 12),
        ("generate", "tracking", "--detections", "4", "--seed", "2"): None,
        ("generate", "tomography", "--length", "4", "--labels", "2", "--seed", "1"): None,
    }
    for argv, shape in expected.items():
        code = main(list(argv))
        out = capsys.readouterr().out
        assert code == 0
        instance = parse_lp(out)
        if shape is not None:
            assert (instance.num_vars, len(instance.constraints)) == shape


def test_generate_output_file_deterministic(tmp_path, capsys):
    a = tmp_path / "a.lp"
    b = tmp_path / "b.lp"
    for target in (a, b):
        code = main(["generate", "mrf", "--nodes", "3", "--labels", "2",
                     "--seed", "0", "-o", str(target)])
        assert code == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()
    assert parse_lp(a.read_text()).num_vars == 14


def test_generate_then_solve_round_trip(capsys):
    assert main(["generate", "mrf", "--nodes", "5", "--labels", "3", "--seed", "7"]) == 0
    text = capsys.readouterr().out
    monkey_stdin = io.StringIO(text)
    old = sys.stdin
    sys.stdin = monkey_stdin
    try:
        code = main(["solve", "-"])
    finally:
        sys.stdin = old
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert payload["status"] == "solved"
    instance = parse_lp(text)
    solution = [payload["solution"][nm] for nm in instance.var_names]
    assert instance.check_assignment(solution)


def _mask_times(text):
    return re.sub(r'"(?:time_ms|dual_time_ms|primal_time_ms)": [0-9.eE+-]+', '"t": 0', text)


def test_subprocess_runs_are_identical(tmp_path):
    path = tmp_path / "grid.lp"
    path.write_text(write_lp(mrf_instance(2, 2, 2, seed=4)))
    cmd = [sys.executable, "-m", "bddsolve.cli", "solve", str(path)]
    first = subprocess.run(cmd, capture_output=True, text=True)
    second = subprocess.run(cmd, capture_output=True, text=True)
    assert first.returncode == 0 and second.returncode == 0
    assert _mask_times(first.stdout) == _mask_times(second.stdout)
