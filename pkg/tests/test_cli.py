import csv
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from fuchsian_orbits.cli import SCHEMA_VERSION, main
from oracles import totient_sieve

GOLDEN = Path(__file__).parent / "golden"

GOLDEN_CASES = {
    "enumerate_sl2z_r2": "enumerate --lattice sl2z --radius 2",
    "phi_sl2z_c10": "phi --lattice sl2z --max-c 10",
    "phi_values": "phi --lattice sl2z --max-c 200 --t 5,50",
    "partial_sum": "partial-sum --lattice sl2z --T 1.5,10,100",
    "friends": "friends --lattice sl2z --radius 5 --eta 0.99,1.01",
    "detpairs": "detpairs --lattice sl2z --radius 5 --D 0.5,2 --s 1",
    "congruence_gamma2": "congruence --lattice gamma2 --radius 50,100",
    "discrepancy": "discrepancy --lattice sl2z --radii 10,20,40,80",
    "lengthdensity": "lengthdensity --lattice sl2z --radius 10 --intervals 0:5,7:8",
}


def run(capsys, cmd):
    argv = cmd.split() if isinstance(cmd, str) else cmd
    rc = main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    return meta, rows


@pytest.mark.parametrize("name", list(GOLDEN_CASES))
def test_golden_outputs(capsys, name):
    rc, out, _ = run(capsys, GOLDEN_CASES[name])
    assert rc == 0
    assert out == (GOLDEN / f"{name}.txt").read_text()


def test_enumerate_rows(capsys):
    rc, out, _ = run(capsys, "enumerate --lattice sl2z --radius 2")
    meta, rows = parse_csv(out)
    assert rc == 0 and len(rows) == 8
    assert meta["schema_version"] == SCHEMA_VERSION
    assert meta["config"]["radius"] == 2.0 and meta["config"]["lattice"] == "sl2z"
    assert list(rows[0]) == ["x", "y", "norm", "word_length"]


def test_phi_totient(capsys):
    _, out, _ = run(capsys, "phi --lattice sl2z --max-c 10")
    _, rows = parse_csv(out)
    assert [int(r["phi"]) for r in rows] == [1, 1, 2, 2, 4, 2, 6, 4, 6, 4]


def test_partial_sum_values(capsys):
    _, out, _ = run(capsys, "partial-sum --T 1.5,10,100")
    _, rows = parse_csv(out)
    phi = totient_sieve(99)
    assert [int(r["partial_sum"]) for r in rows] == [1, int(phi[1:10].sum()), int(phi[1:].sum())]


def test_friends_uniform_discreteness(capsys):
    rc, out, _ = run(capsys, "friends --eta 0.99 --radius 100 --lattice sl2z")
    _, rows = parse_csv(out)
    assert rc == 0 and rows[0]["friend_count"] == "0"


def test_hecke_components(capsys):
    rc, out, _ = run(capsys, ["friends", "--lattice", "hecke", "--q", "5", "--radius", "10", "--eta", "0.5",
                              "--components", "1@inf,1.7@inf"])
    meta, rows = parse_csv(out)
    assert rc == 0 and int(rows[0]["total"]) > 0
    assert meta["config"]["components"] == "1@inf,1.7@inf"


@pytest.mark.parametrize("cmd", [
    "enumerate --radius -1",
    "enumerate",
    "phi --max-c 0",
    "friends --radius 5 --eta -1",
    "check first-moment --radius 5 --n 10",
    "discrepancy --radii 20,10",
    "discrepancy --radii 10 --shape blob",
    "enumerate --lattice banana --radius 2",
    "bogus-command",
    "lengthdensity --radius 10 --intervals 3:1",
])
def test_usage_errors(capsys, cmd):
    rc, _, err = run(capsys, cmd)
    assert rc == 2
    assert err


def test_cache_dir_reuse(tmp_path, capsys):
    cmd = ["enumerate", "--lattice", "hecke", "--q", "5", "--radius", "10", "--cache-dir", str(tmp_path)]
    rc1, out1, _ = run(capsys, cmd)
    assert any(tmp_path.iterdir())
    rc2, out2, _ = run(capsys, cmd)
    assert rc1 == rc2 == 0 and out1 == out2


def test_cache_env_variable(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FUCHSIAN_ORBITS_CACHE", str(tmp_path))
    rc, out, _ = run(capsys, "enumerate --lattice hecke --q 7 --radius 6")
    assert rc == 0 and any(tmp_path.iterdir())


def test_config_file_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("lattice = hecke\nq = 5\nradius = 4  # file value\n")
    rc, out, _ = run(capsys, ["enumerate", "--config", str(cfg)])
    meta, rows = parse_csv(out)
    assert rc == 0 and meta["config"]["lattice"] == "hecke" and meta["config"]["radius"] == 4.0
    rc, out, _ = run(capsys, ["enumerate", "--config", str(cfg), "--radius", "2"])
    meta, rows2 = parse_csv(out)
    assert meta["config"]["radius"] == 2.0 and len(rows2) < len(rows)


def test_output_file_and_plot_data(tmp_path, capsys):
    out = tmp_path / "phi.csv"
    plot = tmp_path / "plot.csv"
    rc, text, _ = run(capsys, ["phi", "--max-c", "20", "--t", "2,4,8", "-o", str(out), "--emit-plot-data", str(plot)])
    assert rc == 0 and text == ""
    _, rows = parse_csv(out.read_text())
    assert [float(r["t"]) for r in rows] == [2.0, 4.0, 8.0]
    _, prow = parse_csv(plot.read_text())
    assert list(prow[0]) == ["series", "x", "y"] and len(prow) == 3
    assert all(r["series"] == "Phi" for r in prow)


def test_paircorr_deterministic(capsys):
    cmd = "paircorr --s 1 --radius 20 --n 1000 --seed 7"
    rc1, a, _ = run(capsys, cmd)
    rc2, b, _ = run(capsys, cmd)
    assert rc1 == rc2 == 0 and a == b
    d = json.loads(a)
    assert d["schema_version"] == SCHEMA_VERSION and d["config"]["seed"] == 7
    assert d["reference"] == pytest.approx(math.pi)
    assert "cone_average" in d and d["cone_average"]["formula"] == "avg-paircorr"


def test_check_first_moment_pass_and_fail(capsys):
    rc, out, _ = run(capsys, "check first-moment --lattice sl2z --radius 5 --n 100000 --seed 1")
    d = json.loads(out)
    assert rc == 0 and d["passed"] and abs(d["z_score"]) <= 3
    for key in ("formula", "lattice", "params", "n", "seed", "estimate", "stderr", "reference",
                "reference_uncertainty", "z_score", "resample_rate", "schema_version", "config"):
        assert key in d
    rc, out, _ = run(capsys, "check first-moment --lattice sl2z --radius 5 --n 100000 --seed 1 --reference-scale 2")
    assert rc == 1 and not json.loads(out)["passed"]


def test_check_pair_moment_non_homothetic(capsys):
    rc, out, _ = run(capsys, "check pair-moment --lattice gamma2 --cusps 0,inf --radius 3 --n 20000 --seed 2")
    d = json.loads(out)
    assert rc == 0
    assert d["breakdown"]["diagonal"] == 0.0 and d["breakdown"]["homothetic"] is False


def test_check_second_moment_discrepancy(capsys):
    rc, out, _ = run(capsys, "check second-moment-discrepancy --areas 100,1000 --n 5000 --seed 3")
    d = json.loads(out)
    assert rc in (0, 1) and len(d["rows"]) == 2 and d["passed"] == (rc == 0)


def test_workers_flag_deterministic(capsys):
    cmd = "check first-moment --radius 3 --n 4000 --seed 5 --workers 3"
    _, a, _ = run(capsys, cmd)
    _, b, _ = run(capsys, cmd)
    assert json.loads(a)["estimate"] == json.loads(b)["estimate"]


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "fuchsian_orbits.cli", "enumerate", "--radius", "1.5"],
                       capture_output=True, text=True, env={**os.environ})
    assert r.returncode == 0 and len(r.stdout.splitlines()) == 2 + 8
