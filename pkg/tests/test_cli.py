import csv
import json
import math

import pytest

from cohomfield.cli import main
from cohomfield.scenarios import builtin, dumps

BARE = """\
[scenario]
name = bare
xi = "2*y", "1 - y^2"
F = "(y^2 - 1)*exp(x)"
G = "-2*y*exp(x)"
regular = true
hamiltonian = true
box = -30, 6, -3, 3
view = -4, 2, -3, 3
"""


def records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_log_example(capsys):
    code, out, err = run(capsys, "classify", "--scenario", "ham-strip", "--g", "exp(-x)/(1+y^2)", "--mode", "xiprime")
    assert code == 0
    verdict = records(out)[-1]
    assert verdict["record"] == "verdict" and verdict["label"] == "iff"
    assert verdict["c0"] is False and verdict["r_hat"] is None
    assert verdict["sobolev"]["W0,1"] is True
    assert "no C^0 solution" in err


def test_classify_odd_germ(capsys):
    code, out, _ = run(capsys, "classify", "--scenario", "ham-strip", "--g", "y", "--mode", "xiprime")
    assert code == 0
    verdict = records(out)[-1]
    assert verdict["r_hat"] == 4 and all(v is True for v in verdict["sobolev"].values())


def test_classify_syntax_error(capsys):
    code, out, err = run(capsys, "classify", "--scenario", "ham-strip", "--g", "2*")
    assert code == 2
    rec = records(out)[-1]
    assert rec["kind"] == "syntax" and rec["offset"] == 2
    assert "error" in err


def test_unknown_scenario(capsys):
    code, out, _ = run(capsys, "classify", "--scenario", "bogus")
    assert code == 2


def test_conflicting_sources_are_rejected(capsys, tmp_path):
    path = tmp_path / "s.scn"
    path.write_text(dumps(builtin("ham-strip")))
    code, _, _ = run(capsys, "classify", "--scenario", "ham-strip", "--file", str(path))
    assert code == 2


def test_classify_without_pairs(capsys, tmp_path):
    path = tmp_path / "bare.scn"
    path.write_text(BARE)
    code, _, _ = run(capsys, "classify", "--file", str(path))
    assert code == 2


def test_invalid_scenario_file(capsys, tmp_path):
    path = tmp_path / "bad.scn"
    path.write_text(BARE.replace('"2*y", "1 - y^2"', '"0", "0"'))
    code, out, _ = run(capsys, "verify", "--file", str(path))
    assert code == 2
    assert "regular" in records(out)[-1]["message"]


def test_solve_example_one(capsys, tmp_path):
    out_path = tmp_path / "f.csv"
    code, _, err = run(capsys, "solve", "--scenario", "ham-strip", "--g", "1", "--grid", "9,9",
                       "--window=-2,1,-2,2", "--out", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(out_path.open()))
    assert len(rows) == 81 and list(rows[0]) == ["x", "y", "f", "status"]
    checked = 0
    for r in rows:
        x, y = float(r["x"]), float(r["y"])
        if r["status"] == "ok":
            exact = 0.5 * math.log(abs((1 + y) / (1 - y)))
            assert abs(float(r["f"]) - exact) < 1e-6
            checked += 1
        elif r["status"] == "U":
            assert r["f"] == ""
    assert checked > 20
    assert any(r["status"] == "U" for r in rows)  # |y| > 1 is not reached from y = 0
    res = next(json.loads(line) for line in err.splitlines() if line.startswith("{"))
    assert res["record"] == "residual" and res["max"] < 1e-5


def test_solve_empty_grid(capsys):
    code, _, _ = run(capsys, "solve", "--scenario", "ham-strip", "--grid", "0,0")
    assert code == 2


def test_solve_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(capsys, "solve", "--scenario", "three-seps", "--grid", "5,4", "--window=-1,1,-0.5,0.5",
                   "--out", str(p))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_contact(capsys):
    code, out, _ = run(capsys, "contact", "--scenario", "nonham-strip", "--reverse", "--etas", "1e-1,1e-3,10")
    assert code == 0
    rec = records(out)[0]
    assert abs(rec["alpha_hat"] - 3.0) < 0.1


def test_contact_bad_etas(capsys):
    assert run(capsys, "contact", "--scenario", "ham-strip", "--etas", "1e-1,0,10")[0] == 2


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--scenario", "ham-strip")
    assert code == 0
    recs = records(out)
    assert recs[0]["failures"] == [] and recs[1]["ok"] is True


def _thick(svg):
    return svg.count('id="separatrix-')


@pytest.mark.parametrize("name,count", [("ham-strip", 2), ("three-seps", 3)])
def test_render_separatrices(capsys, tmp_path, name, count):
    path = tmp_path / f"{name}.svg"
    assert run(capsys, "render", "--scenario", name, "--out", str(path))[0] == 0
    svg = path.read_text()
    assert svg.startswith("<?xml") and _thick(svg) == count
    assert 'id="transversal-' in svg


def test_render_without_pairs(capsys, tmp_path):
    scn = tmp_path / "bare.scn"
    scn.write_text(BARE)
    path = tmp_path / "bare.svg"
    assert run(capsys, "render", "--file", str(scn), "--out", str(path))[0] == 0
    assert _thick(path.read_text()) == 0


def test_render_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        run(capsys, "render", "--scenario", "ham-strip", "--out", str(p))
    assert a.read_bytes() == b.read_bytes()


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("[integrator]\nrtol = 1e-12\natol = 1e-12\n\n[solve]\nmask_distance = 0.01\n")
    code, out, _ = run(capsys, "solve", "--scenario", "three-seps", "--grid", "3,3", "--window=-1,1,-0.5,0.5",
                       "--config", str(cfg))
    assert code == 0 and out.startswith("x,y,f,status")
    cfg.write_text("[integrator]\nspeed = 3\n")
    assert run(capsys, "solve", "--scenario", "three-seps", "--config", str(cfg))[0] == 2
