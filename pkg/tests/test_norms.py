import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parakernel.errors import DegenerateDenominator, UnresolvedWeightSingularity
from parakernel.fields import SampledField, graded_axis
from parakernel.norms import (WeightedNormSpec, coercive_ratio, divergence_sentinel,
                              norm_space_outer, norm_time_outer, weighted_norm)


def ones(nx=401, nt=11):
    return SampledField((np.linspace(0, 1, nx),), np.linspace(0, 1, nt), np.ones((nx, nt)))


def test_frozen_weighted_unit_norm():
    # |x^{1/4}| in L_2 over (0,1)^2 is (int x^{1/2})^{1/2} = (2/3)^{1/2}
    fld = SampledField((graded_axis(1.0, 1e-4, 0.005),), np.linspace(0, 1, 5),
                       np.ones((len(graded_axis(1.0, 1e-4, 0.005)), 5)))
    v = norm_time_outer(fld, WeightedNormSpec(2, 2, 0.25))
    assert v.value == pytest.approx((2 / 3) ** 0.5, abs=1e-4)


def test_unweighted_norm_exact_for_constants():
    v = weighted_norm(ones(), WeightedNormSpec(3, 2, 0.0, weight="none"))
    assert v.value == pytest.approx(1.0, abs=1e-14)
    assert v.error == pytest.approx(0.0, abs=1e-14)


def test_admissible_interval():
    assert WeightedNormSpec(2, 2, 0.49).admissible
    assert not WeightedNormSpec(2, 2, 0.5).admissible
    assert not WeightedNormSpec(3, 2, -1 / 3).admissible
    with pytest.raises(ValueError):
        WeightedNormSpec(1.0, 2)
    with pytest.raises(ValueError):
        WeightedNormSpec(2, 2, weight="distance")


def test_singular_weight_refused():
    with pytest.raises(UnresolvedWeightSingularity):
        weighted_norm(ones(), WeightedNormSpec(2, 2, -0.5))


@pytest.mark.parametrize("mu,p,diverges", [(-0.75, 2, True), (-0.5, 2, True), (-0.45, 2, False),
                                           (0.0, 2, False), (-0.4, 3, True), (-0.3, 3, False)])
def test_divergence_sentinel(mu, p, diverges):
    assert divergence_sentinel(mu, p) is diverges


def _random_field(seed):
    rng = np.random.default_rng(seed)
    axes = (np.sort(np.r_[0.0, rng.uniform(0, 1, 7), 1.0]), np.linspace(0.1, 1, 6))
    times = np.sort(np.r_[0.0, rng.uniform(0, 1, 4), 1.0])
    vals = rng.normal(size=(9, 6, 6))
    return SampledField(axes, times, vals)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.floats(1.2, 5), mu=st.floats(-0.3, 0.6))
def test_nestings_coincide_when_p_equals_q(seed, p, mu):
    fld = _random_field(seed)
    spec = WeightedNormSpec(p, p, mu)
    a = norm_time_outer(fld, spec).value
    b = norm_space_outer(fld, spec).value
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.floats(1.2, 4), q=st.floats(1.2, 4),
       mu=st.floats(-0.2, 0.5))
def test_minkowski_ordering(seed, p, q, mu):
    # the outer exponent being the larger one gives the smaller norm
    fld = _random_field(seed)
    spec = WeightedNormSpec(p, q, mu)
    t_out = norm_time_outer(fld, spec).value
    s_out = norm_space_outer(fld, spec).value
    if q >= p:
        assert t_out <= s_out * (1 + 1e-12)
    else:
        assert s_out <= t_out * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), c=st.floats(-10, 10).filter(lambda v: abs(v) > 1e-3))
def test_homogeneity(seed, c):
    fld = _random_field(seed)
    spec = WeightedNormSpec(2.5, 1.7, 0.2)
    a = weighted_norm(fld, spec).value
    b = weighted_norm(fld.with_values(c * fld.values), spec).value
    assert b == pytest.approx(abs(c) * a, rel=1e-12)


def test_richardson_error_tracks_true_error():
    x = np.linspace(0, 1, 81)
    t = np.linspace(0, 1, 41)
    vals = np.sin(np.pi * x)[:, None] * (1 + t)[None, :]
    fld = SampledField((x,), t, vals)
    v = weighted_norm(fld, WeightedNormSpec(2, 2, 0.0, weight="none"))
    exact = np.sqrt(0.5 * 7 / 3)
    assert abs(v.value - exact) <= 3 * v.error + 1e-12
    assert v.error < 1e-3


def test_coercive_ratio_and_degenerate_denominator():
    x = np.linspace(0, 1, 21)
    t = np.linspace(0, 1, 11)
    one = SampledField((x,), t, np.ones((21, 11)))
    spec = WeightedNormSpec(2, 2, 0.0, weight="none")
    r = coercive_ratio({(0, 0): one}, one, one.with_values(2 * one.values), spec)
    assert r.value == pytest.approx(1.0)
    with pytest.raises(DegenerateDenominator):
        coercive_ratio({(0, 0): one}, one, one.with_values(0 * one.values), spec)


def test_off_diagonal_counted_twice():
    x = np.linspace(0.1, 1, 5)
    fld = SampledField((x, x), np.linspace(0, 1, 3), np.ones((5, 5, 3)))
    spec = WeightedNormSpec(2, 2, 0.0, weight="none")
    r = coercive_ratio({(0, 1): fld}, fld.with_values(0 * fld.values), fld, spec)
    assert r.value == pytest.approx(2.0)
