import numpy as np
import pytest

from parakernel.errors import ModeUnavailable
from parakernel.paths import make_path
from parakernel.sweeps import SweepGrid, coercive_sweep, default_family, wall_family, wall_trend

PATH = make_path([0, 0.3, 0.7, 1], [np.diag([1.0, 0.6]), np.diag([0.5, 1.5]),
                                    np.diag([1.2, 0.8])], 0.5, 2)
SMALL = SweepGrid(half_width=2.0, height=2.0, h_tangential=0.2, h_wall=0.02, h_max=0.2,
                  n_times=11)


def test_family_is_seeded():
    a = [m.label for m in default_family(seed=4)]
    b = default_family(seed=4)
    assert a == [m.label for m in b] and len(a) == 12
    assert default_family(seed=4)[0].packets == b[0].packets
    assert default_family(seed=5)[0].packets != b[0].packets


def test_wall_family_geometry():
    src = wall_family(2, 0.05)
    pk = src.packets[0]
    assert pk.center == (0.0, 0.05)
    assert pk.cov[-1] == pytest.approx(0.025 ** 2)


def test_cross_terms_refused_for_halfspace():
    bad = make_path([0, 1], [np.array([[1.0, 0.2], [0.2, 1.0]])], 0.5, 2)
    with pytest.raises(ModeUnavailable):
        coercive_sweep(bad, grid=SMALL)


def test_small_sweep_structure_and_nesting_agreement():
    fam = default_family(size=3)
    r = coercive_sweep(PATH, "both", mu_grid=[0.0, 0.3], family=fam, grid=SMALL, refine=False)
    assert len(r.rows) == 4
    by = {(row["mu"], row["nesting"]): row["ratio_coarse"] for row in r.rows}
    # p = q: both nestings are the same norm
    assert by[(0.3, "time-outer")] == pytest.approx(by[(0.3, "space-outer")], rel=1e-12)
    assert all(np.isfinite(row["ratio_coarse"]) for row in r.rows)
    assert r.provenance["seed"] == 0


def test_sweep_is_deterministic():
    fam = default_family(size=2)
    a = coercive_sweep(PATH, "Lpq", p=3, q=2, mu_grid=[0.1], family=fam, grid=SMALL, refine=False)
    b = coercive_sweep(PATH, "Lpq", p=3, q=2, mu_grid=[0.1], family=fam, grid=SMALL, refine=False)
    assert a.to_csv() == b.to_csv() and a.to_json() == b.to_json()


def test_wall_trend_flat_inside_range():
    r = wall_trend(PATH, 2, 2, mu=0.0, deltas=[0.1, 0.05, 0.025])
    assert r.verdict == "FLAT"
