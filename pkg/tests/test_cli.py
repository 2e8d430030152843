import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from algebrodyn.catalog import kerr_poly
from algebrodyn.cli import main


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_roots_csv(tmp_path, capsys):
    path = tmp_path / "pi.json"
    path.write_text(json.dumps(kerr_poly(0.5).to_dict()))
    out = tmp_path / "roots.csv"
    code, _, _ = run(["roots", "--pi", str(path), "--samples", "3", "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 27 * 2
    assert set(rows[0]) >= {"t", "x", "y", "z", "branch", "ReG", "ImG", "absP", "ill_conditioned"}


def test_roots_deterministic_across_workers(tmp_path, capsys, monkeypatch):
    texts = []
    for workers in ("1", "3"):
        monkeypatch.setenv("ALGEBRODYN_WORKERS", workers)
        out = tmp_path / f"r{workers}.csv"
        assert run(["roots", "--catalog", "born", "--a", "0.5", "--samples", "6", "--out", str(out)], capsys)[0] == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_invalid_inputs(tmp_path, capsys, monkeypatch):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"monomials": []}))
    assert run(["roots", "--pi", str(empty)], capsys)[0] == 2
    assert run(["roots"], capsys)[0] == 2
    bad = tmp_path / "cfg.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert run(["roots", "--config", str(bad)], capsys)[0] == 2
    assert run(["roots", "--catalog", "kerr", "--tol", "-1"], capsys)[0] == 2
    monkeypatch.setenv("ALGEBRODYN_WORKERS", "x")
    assert run(["roots", "--catalog", "kerr"], capsys)[0] == 2


def test_config_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"catalog": "kerr", "a": 0.5, "radius": 1.0, "nodes": 302}))
    code, out, _ = run(["charge", "--config", str(cfg), "--radius", "2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["radius"] == 2.0 and abs(doc["q"] - 0.25) < 1e-3


def test_charge_intersects_locus(capsys):
    code, _, err = run(["charge", "--catalog", "kerr", "--a", "0.5", "--radius", "0.5"], capsys)
    assert code == 3 and "SphereIntersectsLocus" in err


def test_locus_and_json(tmp_path, capsys):
    out = tmp_path / "locus.csv"
    code, _, _ = run(["locus", "--catalog", "kerr", "--a", "0.5", "--samples", "24", "--out", str(out)], capsys)
    rows = list(csv.DictReader(out.open()))
    assert code == 0 and rows
    rho = [np.hypot(float(r["x"]), float(r["y"])) for r in rows]
    assert max(abs(r - 0.5) for r in rho) < 1e-6
    code, text, _ = run(["locus", "--catalog", "kerr", "--a", "0.5", "--samples", "16", "--format", "json"], capsys)
    assert code == 0 and json.loads(text)[0]["t"] == 0.0
    code, _, _ = run(["locus", "--catalog", "kerr", "--a", "0.5", "--samples", "8", "--half-width", "0.2"], capsys)
    assert code == 3


def test_field_and_catalog(tmp_path, capsys):
    out = tmp_path / "f.csv"
    code, _, err = run(["field", "--catalog", "kerr", "--a", "0.5", "--samples", "4", "--t", "-0.1", "0", "0.1", "--out", str(out)], capsys)
    assert code == 0 and "residuals" in err
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 * 64
    out2 = tmp_path / "c.csv"
    assert run(["catalog", "--catalog", "coulomb", "--samples", "2", "--half-width", "1", "--out", str(out2)], capsys)[0] == 0
    r = next(csv.DictReader(out2.open()))
    E = np.array([float(r[k]) for k in ("Ex", "Ey", "Ez")])
    assert abs(np.linalg.norm(E) - 1 / (4 * 3)) < 1e-12


def test_duplicons_and_c3map(tmp_path, capsys):
    line = tmp_path / "line.json"
    line.write_text(json.dumps({"u": [0, 1], "v": [0, 1], "w": [0], "p": [0]}))
    code, out, _ = run(["duplicons", "--line", str(line), "--point", "0.5,0,0,2"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and sorted(float(r["Re_tau"]) for r in rows) == [-1.5, 2.5]
    code, out, _ = run(["c3map", "--random", "5", "--rng-seed", "3"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and len(rows) == 5
    for r in rows:
        T, X = float(r["T"]), np.array([float(r[k]) for k in ("X1", "X2", "X3")])
        assert abs(T * T - X @ X - float(r["S2"])) < 1e-12 * (1 + T * T)
    zf = tmp_path / "z.json"
    zf.write_text(json.dumps([["1", "1i", "0"]]))
    code, out, _ = run(["c3map", "--z", str(zf)], capsys)
    r = next(csv.DictReader(out.splitlines()))
    assert float(r["T"]) == 2 and float(r["X3"]) == 2


def test_residuals_command(capsys):
    code, out, _ = run(["residuals", "--catalog", "kerr", "--a", "0.5", "--points", "200", "--n", "8", "--h", "0.02", "--center", "0.6,0.4,1.2"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["strength_cross_validation"] < 1e-8
    assert max(doc["exact"].values()) < 1e-10


def test_entry_point():
    res = subprocess.run([sys.executable, "-m", "algebrodyn.cli", "c3map", "--random", "1"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("Re_sigma")


def test_born_ring_example(capsys):
    code, out, _ = run(["locus", "--catalog", "born", "--a", "0.5", "--imaginary-b", "--t", "0"], capsys)
    rows = list(csv.DictReader(out.splitlines()))
    assert code == 0 and rows
    assert {r["component"] for r in rows} == {"0"} and {r["dim"] for r in rows} == {"1"}
    assert max(abs(np.hypot(float(r["x"]), float(r["y"])) - 0.5) for r in rows) < 1e-6
    assert max(abs(float(r["z"])) for r in rows) < 1e-6
