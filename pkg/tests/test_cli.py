import json
import subprocess
import sys

import pytest

from treecvrp.cli import main, parse_overrides, UsageError
from treecvrp.model import Instance, Solution, Tour, read_instance, read_solution, star, verify, write_instance, write_solution


@pytest.fixture
def star_file(tmp_path):
    path = tmp_path / "star.json"
    path.write_text(write_instance(star([1, 1, 4], 2)))
    return path


def _run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_then_solve_and_verify(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert _run(["gen", "random_binary", "--seed", 3, "--terminals", 6, "--k", 2, "-o", inst], capsys)[0] == 0
    doc = json.loads(inst.read_text())
    assert doc["metadata"]["family"] == "random_binary"
    sol = tmp_path / "sol.json"
    for algo in ("exact", "exact_config", "itp", "greedy", "ptas"):
        assert _run(["solve", inst, "--algo", algo, "-o", sol], capsys)[0] == 0
        code, out, _ = _run(["verify", inst, sol], capsys)
        assert code == 0 and json.loads(out)["feasible"]


def test_solve_is_byte_stable(star_file, tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        _run(["solve", star_file, "--algo", "ptas", "--preset", "exhaustive", "-o", out], capsys)
    assert a.read_bytes() == b.read_bytes()
    assert read_solution(a.read_text()).cost == 12


def test_solve_with_overrides(star_file, capsys):
    code, out, _ = _run(["solve", star_file, "--algo", "ptas", "--preset", "exhaustive",
                         "--override", "M=3,xsize=2,xstrategy=geometric_grid"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["metadata"]["ptas"]["params"]["x_strategy"] == "geometric_grid"


def test_parse_overrides():
    got = parse_overrides("L=2,M=inf,dtilde=3/2,xvalues=2:4")
    assert got == {"min_subtour_demand": 2, "max_tours_per_component": float("inf"),
                   "d_tilde": __import__("fractions").Fraction(3, 2), "x_values": (2, 4)}
    with pytest.raises(UsageError):
        parse_overrides("bogus=1")
    with pytest.raises(UsageError):
        parse_overrides("L")


def test_unknown_override_is_usage_error(star_file, capsys):
    code, _, err = _run(["solve", star_file, "--algo", "ptas", "--override", "nope=1"], capsys)
    assert code == 2 and "unknown override" in err


def test_argparse_usage_exit(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])
    assert exc.value.code == 2


def test_verify_rejects_bad_solution(star_file, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(write_solution(Solution((Tour.of([1, 2, 3]),), None)))
    code, out, _ = _run(["verify", star_file, bad], capsys)
    assert code == 1
    kinds = {v["kind"] for v in json.loads(out)["violations"]}
    assert "capacity" in kinds


def test_malformed_instance_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2}')
    code, _, err = _run(["lb", bad], capsys)
    assert code == 1 and "missing field" in err


def test_budget_exit_3(tmp_path, capsys, monkeypatch):
    path = tmp_path / "big.json"
    path.write_text(write_instance(star([1] * 8, 2)))
    monkeypatch.setenv("TREECVRP_EXACT_MAX_TERMINALS", "4")
    code, _, err = _run(["solve", path, "--algo", "exact"], capsys)
    assert code == 3 and "budget" in err


def test_non_unit_needs_splittable(tmp_path, capsys):
    path = tmp_path / "split.json"
    path.write_text(write_instance(Instance((-1, 0, 0), (0, 1, 2), (0, 3, 2), 2)))
    assert _run(["solve", path, "--algo", "exact"], capsys)[0] == 1
    code, out, _ = _run(["solve", path, "--algo", "exact", "--splittable"], capsys)
    assert code == 0
    inst = read_instance(path.read_text())
    assert verify(inst, read_solution(out)).feasible
    code, out, _ = _run(["solve", path, "--algo", "itp", "--splittable", "--peel", "0.5"], capsys)
    assert code == 0 and json.loads(out)["metadata"]["prepaid_tours"] == 2


def test_lb_output(star_file, capsys):
    code, out, _ = _run(["lb", star_file], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc == {"lb_edge_ceiling": "12", "lb_edge_fractional": "6", "lb_radial": "6", "tree_tsp": "12"}


def test_decompose_output(tmp_path, capsys):
    inst = tmp_path / "cat.json"
    _run(["gen", "caterpillar", "--length", 8, "--k", 2, "-o", inst], capsys)
    code, out, _ = _run(["decompose", inst, "--gamma-k", 3], capsys)
    doc = json.loads(out)
    assert code == 0 and all(doc["checks"].values())
    assert doc["violations"] == []


def test_transform_bands_and_hat(star_file, tmp_path, capsys):
    out = tmp_path / "bands"
    assert _run(["transform", star_file, "--bands", 2, "-o", out], capsys)[0] == 0
    mapping = json.loads((out / "mapping.json").read_text())
    for s in mapping["sets"]:
        assert (out / s["file"]).exists()
    hat = tmp_path / "hat"
    assert _run(["transform", star_file, "--hat-tree", "--gamma-k", 2, "-o", hat], capsys)[0] == 0
    assert {p.name for p in hat.iterdir()} == {"normalized.json", "hat.json", "mapping.json"}
    code, _, err = _run(["transform", star_file, "--hat-tree"], capsys)
    assert code == 2


def test_solve_with_bands(star_file, capsys):
    code, out, _ = _run(["solve", star_file, "--algo", "exact", "--bands", 2], capsys)
    assert code == 0
    assert verify(star([1, 1, 4], 2), read_solution(out)).feasible


def test_gen_fig5_errors(capsys):
    code, _, err = _run(["gen", "fig5", "--k", 3, "--m", 4], capsys)
    assert code == 1 and err


def test_bench_outputs_are_stable(tmp_path, capsys):
    runs = []
    for name, jobs in (("a", 1), ("b", 2)):
        out = tmp_path / name
        code, _, _ = _run(["bench", "--count", 4, "--terminals", 6, "--k", 2,
                           "--algos", "exact,itp,greedy,ptas", "--jobs", jobs, "-o", out], capsys)
        assert code == 0
        runs.append(out)
    for f in ("report.json", "report.txt"):
        assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()
    assert (runs[0] / "timings.json").exists()


def test_bench_table_to_stdout(capsys):
    code, out, _ = _run(["bench", "--family", "fig5", "--k", 3, "--m", 3, "--algos", "exact,itp"], capsys)
    assert code == 0 and "fig5-k3-m3" in out


def test_bench_unknown_algo(capsys):
    assert _run(["bench", "--count", 1, "--algos", "magic"], capsys)[0] == 2


def test_module_entry_point(star_file):
    proc = subprocess.run([sys.executable, "-m", "treecvrp", "lb", str(star_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["tree_tsp"] == "12"
