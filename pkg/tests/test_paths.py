import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parakernel.errors import (EllipticityViolated, EmptySpan, InvalidPath,
                               NonMonotoneBreakpoints, NonSymmetric)
from parakernel.paths import constant_path, load_path, make_path, random_path

from oracles import piecewise_integral


def two_piece():
    return make_path([0.0, 0.4, 1.0], [np.diag([1.0, 0.5]), [[0.6, 0.2], [0.2, 1.3]]], 0.4, 2)


def test_integral_crossing_breakpoint():
    p = two_piece()
    B = p.integrate(0.1, 0.9).B
    expected = 0.3 * np.diag([1.0, 0.5]) + 0.5 * np.array([[0.6, 0.2], [0.2, 1.3]])
    assert np.allclose(B, expected, rtol=0, atol=1e-15)


def test_constant_extension_outside_span():
    p = two_piece()
    B = p.integrate(-1.0, 2.0).B
    expected = 1.4 * np.diag([1.0, 0.5]) + 1.6 * np.array([[0.6, 0.2], [0.2, 1.3]])
    assert np.allclose(B, expected, atol=1e-14)


def test_evaluate_right_continuous():
    p = two_piece()
    assert np.array_equal(p.evaluate(0.4), p.matrices[1])
    assert np.array_equal(p.evaluate(0.39999), p.matrices[0])


def test_empty_span_rejected():
    with pytest.raises(EmptySpan):
        two_piece().integrate(0.5, 0.5)


@pytest.mark.parametrize("mats,exc", [
    ([[[1.0, 0.1], [0.2, 1.0]]], NonSymmetric),
    ([[[5.0, 0.0], [0.0, 1.0]]], EllipticityViolated),
])
def test_invalid_matrices(mats, exc):
    with pytest.raises(exc):
        make_path([0, 1], mats, 0.5, 2)


def test_non_monotone_breakpoints():
    with pytest.raises(NonMonotoneBreakpoints):
        make_path([0, 0.5, 0.5], [np.eye(1), np.eye(1)], 0.5, 1)


def test_errors_are_value_errors():
    assert issubclass(InvalidPath, ValueError)


def test_load_path_roundtrip(tmp_path):
    p = two_piece()
    f = tmp_path / "p.json"
    f.write_text(json.dumps(p.to_dict()))
    q = load_path(f)
    assert np.array_equal(q.matrices, p.matrices)
    assert load_path(p.describe()).breakpoints.tolist() == p.breakpoints.tolist()
    with pytest.raises(InvalidPath):
        load_path({"dim": 2, "nu": 0.5})


def test_reflection_and_shear():
    assert two_piece().is_reflection_symmetric() is False
    d = make_path([0, 1], [np.diag([1.0, 0.5])], 0.4, 2)
    assert d.is_reflection_symmetric()
    A = np.array([[1.0, 0.3], [0.3, 0.75]])
    q = make_path([0, 0.5, 1], [A, 2 * A], 0.3, 2)
    assert np.allclose(q.normal_shear(), [0.4])
    assert two_piece().normal_shear() is None


def test_congruence_matches_direct():
    T = np.array([[1.0, 0.5], [0.0, 1.0]])
    p = two_piece()
    q = p.congruence(T)
    assert np.allclose(q.matrices[1], T @ p.matrices[1] @ T.T)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), dim=st.integers(1, 3),
       s=st.floats(-0.5, 1.5), span=st.floats(1e-3, 2.0))
def test_integral_matches_interval_walk(seed, dim, s, span):
    p = random_path(np.random.default_rng(seed), dim, 0.3, n_intervals=4)
    t = s + span
    ref = piecewise_integral(p.breakpoints, p.matrices, s, t)
    assert np.allclose(p.integrate(s, t).B, ref, rtol=1e-13, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), a=st.floats(0, 1), b=st.floats(0, 1), c=st.floats(0, 1))
def test_integral_is_additive_and_elliptic(seed, a, b, c):
    s, r, t = sorted((a, b, c))
    if r - s < 1e-6 or t - r < 1e-6:
        return
    p = random_path(np.random.default_rng(seed), 2, 0.3)
    total = p.integrate(s, t).B
    assert np.allclose(total, p.integrate(s, r).B + p.integrate(r, t).B, atol=1e-14)
    eig = np.linalg.eigvalsh(total)
    assert eig[0] >= p.nu * (t - s) * (1 - 1e-9)
    assert eig[-1] <= (t - s) / p.nu * (1 + 1e-9)


def test_constant_path_nu():
    p = constant_path([[2.0]])
    assert p.nu == pytest.approx(0.5)
