import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from parakernel.cli import main

PATH = {"dim": 2, "nu": 0.4, "breakpoints": [0, 0.4, 1],
        "matrices": [[1.0, 0, 0, 0.5], [0.6, 0, 0, 1.3]]}
SMALL_GRID = {"half_width": 2.0, "height": 2.0, "h_tangential": 0.2, "h_wall": 0.02,
              "h_max": 0.2, "n_times": 11}
PROBE = {"n_tau": 7, "n_wall": 9, "n_rho": 5, "n_directions": 4}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_kernel_whole_space(tmp_path, capsys):
    q = write(tmp_path, "q.json", {"path": {"dim": 1, "nu": 1.0, "breakpoints": [0, 1],
                                            "matrices": [[1.0]]},
                                   "queries": [{"x": [0.0], "y": [0.0], "t": 1, "s": 0},
                                               {"x": [1.0], "y": [0.0], "t": 1, "s": 0,
                                                "alpha": [1]}]})
    out = tmp_path / "k.csv"
    assert main(["kernel", "--query-file", q, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert float(rows[0]["value"]) == pytest.approx(0.2820947918, abs=1e-10)
    assert float(rows[1]["value"]) == pytest.approx(-0.1098478, abs=1e-7)


def test_kernel_halfspace_and_order_cap(tmp_path):
    p = write(tmp_path, "p.json", PATH)
    q = write(tmp_path, "q.json", [{"x": [0.3, 0.0], "y": [0.1, 0.4], "t": 0.9, "s": 0.1}])
    out = tmp_path / "k.csv"
    assert main(["kernel", "--type", "dirichlet", "--path", p, "--query-file", q,
                 "--out", str(out)]) == 0
    assert abs(float(read_csv(out)[0]["value"])) < 1e-15
    q2 = write(tmp_path, "q2.json", [{"x": [0.3, 0.1], "y": [0.1, 0.4], "t": 0.9, "s": 0.1,
                                      "alpha": [2, 1], "beta": [0, 0]}])
    assert main(["kernel", "--path", p, "--query-file", q2, "--max-order", "2"]) == 2


def test_usage_errors(tmp_path):
    assert main(["kernel", "--query-file", str(tmp_path / "missing.json")]) == 2
    bad = write(tmp_path, "bad.json", {"dim": 2, "nu": 0.5, "breakpoints": [0, 1],
                                       "matrices": [[5.0, 0, 0, 1]]})
    q = write(tmp_path, "q.json", [{"x": [0, 0], "y": [0, 0], "t": 1, "s": 0}])
    assert main(["kernel", "--path", bad, "--query-file", q]) == 2
    assert main(["bogus"]) == 2


def test_verify_pass_and_fail(tmp_path):
    ok = write(tmp_path, "ok.json", {"dim": 2, "probe": PROBE,
                                     "templates": [{"alpha": [0, 1], "beta": [0, 0]}]})
    assert main(["verify", "--bound", "dirichlet", "--config", ok, "--out-dir",
                 str(tmp_path / "a"), "--no-figures"]) == 0
    bad = write(tmp_path, "bad.json", {"dim": 2, "probe": PROBE,
                                       "templates": [{"alpha": [0, 1], "beta": [0, 0],
                                                      "inflate": ["x"]}]})
    assert main(["verify", "--bound", "dirichlet", "--config", bad, "--out-dir",
                 str(tmp_path / "b")]) == 1
    meta = json.loads((tmp_path / "b" / "dirichlet_000.json").read_text())
    assert meta["flags"][0]["error"] == "UnboundedRatio"
    assert (tmp_path / "b" / "dirichlet_000.png").exists()


def test_scan_is_reproducible_and_compare(tmp_path):
    cfg = write(tmp_path, "cfg.json", {"grid": SMALL_GRID,
                                       "path": {"dim": 2, "nu": 0.5, "breakpoints": [0, 0.5, 1],
                                                "matrices": [[1, 0, 0, 0.6], [0.5, 0, 0, 1.2]]}})
    args = ["scan", "--config", cfg, "--mu-from", "-0.2", "--mu-to", "0.2", "--steps", "2",
            "--no-refine", "--seed", "3"]
    assert main(args + ["--out-dir", str(tmp_path / "r1")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "r2"), "--no-figures"]) == 0
    for ext in ("csv", "json"):
        assert (tmp_path / "r1" / f"sweep.{ext}").read_bytes() == \
            (tmp_path / "r2" / f"sweep.{ext}").read_bytes()
    assert (tmp_path / "r1" / "sweep.png").exists()
    assert main(["compare", str(tmp_path / "r1" / "sweep.csv"),
                 str(tmp_path / "r2" / "sweep.csv")]) == 0


def test_solve_writes_field_and_report(tmp_path):
    dom = write(tmp_path, "dom.json", {"kind": "rectangle", "lower": [0, 0], "upper": [1, 1]})
    p = write(tmp_path, "p.json", PATH)
    src = write(tmp_path, "src.json", {"packets": [{"center": [0.5, 0.5],
                                                    "cov": [0.02, 0, 0, 0.02],
                                                    "window": [0, 0.5]}]})
    norm = write(tmp_path, "norm.json", {"p": 2, "q": 2, "mu": 0.2})
    out = tmp_path / "u.bin"
    rep = tmp_path / "rep.json"
    assert main(["solve", "--domain", dom, "--path", p, "--f", src, "--out", str(out),
                 "--report", str(rep), "--norm", norm, "--dt", "0.05", "--t-final", "0.5",
                 "--h-wall", "0.05", "--h-max", "0.1"]) == 0
    data = json.loads(rep.read_text())
    assert data["weighted_check"]["inside_window"] is True
    assert np.ptp(data["mass"][1:]) > 0  # source adds mass
    assert (tmp_path / "u_final.png").exists()


def test_entry_point_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "parakernel.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
