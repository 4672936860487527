import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parakernel.errors import AmbiguousTime, OrderTooHigh
from parakernel.kernels import (KernelQuery, gamma, gamma_derivative, gamma_ds, gamma_dt,
                                multi_indices, multi_indices_upto)
from parakernel.paths import constant_path, make_path, random_path

from oracles import gaussian, heat1d_dx, heat1d_dxx, piecewise_integral

UNIT = constant_path([[1.0]])


def q(alpha, beta, x, y, t, s):
    return KernelQuery(alpha, beta, np.asarray(x, float), np.asarray(y, float), t, s)


def test_frozen_one_dimensional_values():
    assert gamma(UNIT, [0.0], [0.0], 1.0, 0.0) == pytest.approx(0.2820947918, abs=1e-10)
    assert gamma(UNIT, [1.0], [0.0], 1.0, 0.0) == pytest.approx(0.2196956, abs=1e-7)
    d = gamma_derivative(q((1,), (0,), [1.0], [0.0], 1.0, 0.0), UNIT)
    assert d == pytest.approx(-0.1098478, abs=1e-7)
    jump = make_path([0, 0.5, 1], [[[2.0]], [[0.5]]], 0.5, 1)
    assert gamma(jump, [0.0], [0.0], 1.0, 0.0) == pytest.approx(0.2523133, abs=1e-7)


def test_vanishes_before_source_time():
    assert gamma(UNIT, [0.0], [0.0], 0.3, 0.3) == 0.0
    assert gamma(UNIT, [0.0], [0.0], 0.2, 0.3) == 0.0


def test_hand_derivatives_1d():
    for x in (-0.7, 0.0, 0.4, 1.3):
        d1 = gamma_derivative(q((1,), (0,), [x], [0.2], 0.8, 0.1), UNIT)
        d2 = gamma_derivative(q((2,), (0,), [x], [0.2], 0.8, 0.1), UNIT)
        assert d1 == pytest.approx(heat1d_dx(x, 0.2, 0.7), rel=1e-12, abs=1e-15)
        assert d2 == pytest.approx(heat1d_dxx(x, 0.2, 0.7), rel=1e-12, abs=1e-15)


def test_multi_index_counts():
    assert len(multi_indices(2, 3)) == 4
    assert len(multi_indices(3, 2)) == 6
    assert len(multi_indices_upto(2, 4)) == 15


def test_order_cap_and_breakpoint_time():
    with pytest.raises(OrderTooHigh):
        gamma_derivative(q((3, 0), (0, 2), [0, 0], [0, 0], 1, 0), constant_path(np.eye(2)))
    p = make_path([0, 0.5, 1], [[[1.0]], [[0.5]]], 0.5, 1)
    with pytest.raises(AmbiguousTime):
        gamma_dt(q((0,), (0,), [0.0], [0.1], 0.5, 0.0), p)
    with pytest.raises(AmbiguousTime):
        gamma_ds(q((0,), (0,), [0.0], [0.1], 0.9, 0.5), p)


def _fd_derivative(path, g, x, y, t, s, h=1e-3):
    """Central differences of the typed-in Gaussian in x (order up to 2 per axis)."""
    B = piecewise_integral(path.breakpoints, path.matrices, s, t)
    n = len(x)
    stencils = []
    for k, order in enumerate(g):
        e = np.zeros(n)
        e[k] = h
        if order == 0:
            stencils.append([(np.zeros(n), 1.0)])
        elif order == 1:
            stencils.append([(e, 0.5 / h), (-e, -0.5 / h)])
        else:
            stencils.append([(e, 1 / h ** 2), (0 * e, -2 / h ** 2), (-e, 1 / h ** 2)])
    total = 0.0
    for combo in itertools.product(*stencils):
        shift = sum(c[0] for c in combo)
        w = math.prod(c[1] for c in combo)
        total += w * gaussian(B, x + shift - y)
    return total


@pytest.mark.parametrize("g", [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1), (1, 2)])
def test_derivatives_match_finite_differences(g):
    p = make_path([0, 0.4, 1], [np.array([[1.0, 0.3], [0.3, 0.7]]), np.diag([0.6, 1.4])], 0.4, 2)
    x = np.array([0.3, -0.2])
    y = np.array([-0.1, 0.25])
    got = gamma_derivative(q(g, (0, 0), x, y, 0.9, 0.1), p)
    ref = _fd_derivative(p, g, x, y, 0.9, 0.1)
    assert got == pytest.approx(ref, rel=2e-5, abs=1e-7)
    # D_y^g = (-1)^|g| D_x^g
    got_y = gamma_derivative(q((0, 0), g, x, y, 0.9, 0.1), p)
    assert got_y == pytest.approx((-1) ** sum(g) * got, rel=1e-13)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), dim=st.integers(1, 3))
def test_forward_and_backward_equations(seed, dim):
    rng = np.random.default_rng(seed)
    p = random_path(rng, dim, 0.4)
    x, y = rng.normal(size=dim) * 0.5, rng.normal(size=dim) * 0.5
    s = float(rng.uniform(0.0, 0.3))
    t = float(rng.uniform(0.5, 1.2))
    if np.any(np.isclose([s, t], p.interior_breakpoints[:, None], atol=1e-4)):
        return
    base = q((0,) * dim, (0,) * dim, x, y, t, s)
    h = 1e-5
    fwd = (gamma(p, x, y, t + h, s) - gamma(p, x, y, t - h, s)) / (2 * h)
    bwd = (gamma(p, x, y, t, s + h) - gamma(p, x, y, t, s - h)) / (2 * h)
    scale = abs(gamma(p, x, y, t, s)) + 1e-3
    assert abs(gamma_dt(base, p) - fwd) < 1e-5 * scale / (t - s)
    assert abs(gamma_ds(base, p) - bwd) < 1e-5 * scale / (t - s)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), dim=st.integers(1, 3))
def test_symmetry_under_swap(seed, dim):
    # the kernel depends on x - y only, so swapping x and y leaves it unchanged
    rng = np.random.default_rng(seed)
    p = random_path(rng, dim, 0.3)
    x, y = rng.normal(size=dim), rng.normal(size=dim)
    assert gamma(p, x, y, 0.9, 0.1) == pytest.approx(gamma(p, y, x, 0.9, 0.1), rel=1e-13)


def test_vectorised_shapes():
    p = constant_path(np.eye(2))
    x = np.zeros((4, 3, 2))
    v = gamma(p, x, np.zeros(2), np.linspace(0.1, 1, 3), 0.0)
    assert v.shape == (4, 3)
    assert np.allclose(v[0], 1 / (4 * np.pi * np.linspace(0.1, 1, 3)))
