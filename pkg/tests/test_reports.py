import numpy as np
import pytest

from parakernel.fields import SampledField, graded_axis, refine_axis
from parakernel.reports import (SweepReport, atomic_write, canonical_json, config_hash,
                                ordered_map, rows_to_csv, worker_count)
from parakernel.sweeps import mollify_and_compare
from parakernel.errors import AxisMismatch


def _square(x):
    return x * x


def test_canonical_json_is_order_independent():
    a = canonical_json({"b": np.float64(1.5), "a": (1, 2), "c": float("inf")})
    b = canonical_json({"c": float("inf"), "a": [1, 2], "b": 1.5})
    assert a == b
    assert config_hash({"x": 1, "y": 2}) == config_hash({"y": 2, "x": 1})


def test_csv_roundtrip_preserves_floats(tmp_path):
    rows = [{"mu": 0.1 + 0.2, "ok": True, "name": "a"}, {"mu": float("nan"), "ok": False,
                                                          "name": "b"}]
    r = SweepReport("demo", ["mu", "ok", "name"], rows, "PASS", {"s": 1}, {"config": {"k": 1}})
    r.write(tmp_path / "rep")
    back = SweepReport.read(tmp_path / "rep")
    assert back.rows[0]["mu"] == 0.1 + 0.2
    assert np.isnan(back.rows[1]["mu"])
    assert back.rows[0]["ok"] is True
    assert back.to_csv() == r.to_csv()
    assert "\n" in rows_to_csv(["a"], [{"a": 1}])


def test_atomic_write_leaves_no_temporaries(tmp_path):
    atomic_write(tmp_path / "x.txt", "hello")
    atomic_write(tmp_path / "x.txt", b"bytes")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]
    assert (tmp_path / "x.txt").read_bytes() == b"bytes"


def test_ordered_map_matches_serial(monkeypatch):
    monkeypatch.setenv("PARAKERNEL_THREADS", "2")
    assert worker_count() == 2
    assert ordered_map(_square, range(7)) == [x * x for x in range(7)]
    monkeypatch.setenv("PARAKERNEL_THREADS", "junk")
    assert worker_count() == 1


def test_compare_flags_drift_beyond_error_bars():
    cols = ["mu", "ratio", "error"]
    a = SweepReport("s", cols, [{"mu": 0.0, "ratio": 1.0, "error": 0.01},
                                {"mu": 0.1, "ratio": 2.0, "error": 0.01}], "PASS")
    b = SweepReport("s", cols, [{"mu": 0.0, "ratio": 1.015, "error": 0.01},
                                {"mu": 0.1, "ratio": 2.5, "error": 0.01}], "PASS")
    cmp = mollify_and_compare(a, b, "ratio", "error")
    assert [r["drift"] for r in cmp.rows] == [False, True]
    c = SweepReport("s", cols, [{"mu": 0.0, "ratio": 1.0, "error": 0.0},
                                {"mu": 0.2, "ratio": 2.0, "error": 0.0}], "PASS")
    with pytest.raises(AxisMismatch):
        mollify_and_compare(a, c, "ratio", "error")


def test_field_save_load(tmp_path):
    f = SampledField((np.linspace(0, 1, 3), np.array([0.0, 2.0])), np.array([0.0, 1.0]),
                     np.arange(12.0).reshape(3, 2, 2), "u", {"k": 1})
    for name in ("f.bin", "f.csv"):
        f.save(tmp_path / name)
        g = SampledField.load(tmp_path / name)
        assert np.array_equal(g.values, f.values) and g.meta == {"k": 1}
    with pytest.raises(ValueError):
        SampledField((np.array([0.0, 1.0]),), np.array([0.0]), np.zeros((3, 1)))


def test_interpolator_vanishes_outside():
    x = np.linspace(0, 1, 5)
    t = np.linspace(0, 1, 5)
    f = SampledField((x,), t, np.ones((5, 5)))
    src = f.interpolator()
    assert np.allclose(src(np.array([[0.5], [2.0]]), 0.5), [1.0, 0.0], rtol=0, atol=1e-14)


def test_graded_axis_properties():
    a = graded_axis(2.0, 0.01, 0.1)
    w = np.diff(a)
    assert a[0] == 0.0 and a[-1] == 2.0
    assert w[0] == pytest.approx(0.01) and w.max() <= 0.1 + 1e-12
    b = graded_axis(2.0, 0.01, 0.1, wall="both")
    assert np.allclose(np.diff(b), np.diff(b)[::-1])
    assert np.array_equal(refine_axis(a)[::2], a)
