import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from macdisp.cli import main

LOG2 = math.log(2)


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _fail(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    err = capsys.readouterr().err
    return exc.value.code, json.loads(err.strip().splitlines()[-1])


def _rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith(("{", "}", " "))]
    return list(csv.reader(io.StringIO("\n".join(lines))))


def test_info_noiseless(data_dir, capsys):
    code, out, _ = _run(["info", "--channel", str(data_dir / "noiseless.json")], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["i1"] == pytest.approx(LOG2, abs=1e-11)
    assert doc["i12"] == pytest.approx(2 * LOG2, abs=1e-11)
    assert doc["v1"] == doc["v12"] == doc["v1_12"] == 0


def test_info_with_input(data_dir, capsys):
    code, out, _ = _run(["info", "--channel", str(data_dir / "f1.json"), "--input",
                         str(data_dir / "uniform_input.json")], capsys)
    assert code == 0 and json.loads(out)["units"] == "nats"


def test_psi_region_csv(capsys):
    code, out, _ = _run(["psi-region", "--v", "1", "0.3", "0.3", "2", "--eps", "0.1", "--resolution", "64"],
                        capsys)
    rows = _rows(out)
    assert rows[0] == ["z1_nats", "z2_nats"]
    pts = np.array(rows[1:], dtype=float)
    assert np.all(np.diff(pts[:, 0]) > 0)


def test_boundary_extremes(data_dir, capsys):
    code, out, _ = _run(["boundary", "--channel", str(data_dir / "noiseless.json"), "--resolution", "64"],
                        capsys)
    rows = _rows(out)
    assert rows[0] == ["R1_nats", "R2_nats", "achiever_id"]
    pts = np.array([r[:2] for r in rows[1:]], dtype=float)
    assert pts[0] == pytest.approx([0.0, 2 * LOG2], abs=1e-9)
    assert pts[-1, 0] == pytest.approx(LOG2, abs=1e-9)


def test_boundary_to_directory(data_dir, tmp_path, capsys):
    code, out, _ = _run(["boundary", "--channel", str(data_dir / "f1.json"), "--resolution", "16",
                         "--out", str(tmp_path)], capsys)
    assert "boundary.csv" in out
    side = json.loads((tmp_path / "boundary_achievers.json").read_text())
    n_rows = len((tmp_path / "boundary.csv").read_text().splitlines()) - 1
    assert len(side["achievers"]) == n_rows


def test_region_sum_facet_half_eps(data_dir, tmp_path, capsys):
    r1, r2 = 0.3, 2 * LOG2 - 0.3
    code, _, _ = _run(["region", "--channel", str(data_dir / "noiseless.json"), "--r1", str(r1),
                       "--r2", repr(r2), "--eps", "0.5", "--resolution", "32", "--count", "21",
                       "--out", str(tmp_path)], capsys)
    assert code == 0
    rows = _rows((tmp_path / "region.csv").read_text())
    assert rows[0] == ["L1_nats", "L2_nats"]
    pts = np.array(rows[1:], dtype=float)
    assert np.all(np.abs(pts[:, 0] + pts[:, 1]) <= 1e-8)
    meta = json.loads((tmp_path / "region.json").read_text())
    assert {inp["case"] for inp in meta["inputs"]} == {"sum_active"}


def test_simulate_and_converse(data_dir, capsys):
    _, out, _ = _run(["simulate", "--channel", str(data_dir / "f2.json"), "--n", "16", "--m1", "3",
                      "--m2", "3", "--trials", "500", "--seed", "1"], capsys)
    rep = json.loads(out)
    assert rep["trials"] == 500 and rep["ci_low"] <= rep["eps_hat"] <= rep["ci_high"]
    _, out, _ = _run(["converse", "--channel", str(data_dir / "f2.json"), "--n", "16", "--r1", "0.1",
                      "--r2", "0.1", "--samples", "2000"], capsys)
    doc = json.loads(out)
    assert 0.0 <= doc["value"] <= 1.0 and doc["stderr"] >= 0


def test_json_errors(data_dir, tmp_path, capsys):
    code, err = _fail(["info", "--channel", str(tmp_path / "missing.json")], capsys)
    assert code == 1 and err["error"] == "FileNotFoundError"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"x1_size": 1, "x2_size": 1, "y_size": 2, "w": [[[0.5, 0.51]]]}))
    code, err = _fail(["info", "--channel", str(bad)], capsys)
    assert code == 1 and "x1=0, x2=0" in err["message"]
    code, err = _fail(["region", "--channel", str(data_dir / "f1.json"), "--r1", "0", "--r2", "0",
                       "--eps", "1.5"], capsys)
    assert code == 1 and "eps" in err["message"]
    code, err = _fail(["boundary"], capsys)
    assert code == 2 and err["error"] == "usage"
    code, err = _fail(["region", "--channel", str(data_dir / "noiseless.json"), "--r1", "0.1", "--r2",
                       "0.1", "--eps", "0.1", "--resolution", "16"], capsys)
    assert code == 1 and "boundary" in err["message"]


def test_report_requires_out(data_dir, capsys):
    code, err = _fail(["report", "--channel", str(data_dir / "f2.json"), "--eps", "0.1"], capsys)
    assert code == 1 and "--out" in err["message"]


def test_module_entry_point(data_dir):
    res = subprocess.run([sys.executable, "-m", "macdisp", "info", "--channel", str(data_dir / "f2.json")],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["units"] == "nats"
