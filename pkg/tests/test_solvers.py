import numpy as np
import pytest

from parakernel.packets import Packet, PacketSource, packet_solution
from parakernel.paths import constant_path, make_path
from parakernel.solvers import output_terms, solve_whole_space

PATH = make_path([0, 0.3, 1], [np.diag([1.0, 0.5]), np.array([[0.7, 0.2], [0.2, 1.2]])], 0.4, 2)
W = 0.3


def ustar(x, t):
    t = np.asarray(t)
    phi = np.where((t > 0) & (t < 1), np.sin(np.pi * t) ** 2, 0.0)
    return phi * np.exp(-np.sum(x ** 2, -1) / (2 * W * W))


def fstar(x, t):
    # d_t u* - a^{ij}(t) D_i D_j u*, typed in by hand
    t = np.broadcast_to(t, x.shape[:-1])
    inside = (t > 0) & (t < 1)
    phi = np.sin(np.pi * t) ** 2
    dphi = 2 * np.pi * np.sin(np.pi * t) * np.cos(np.pi * t)
    g = np.exp(-np.sum(x ** 2, -1) / (2 * W * W))
    A = PATH.evaluate(t)
    H = (x[..., :, None] * x[..., None, :] / W ** 4 - np.eye(2) / W ** 2) * g[..., None, None]
    return np.where(inside, dphi * g - phi * np.einsum("...ij,...ij->...", A, H), 0.0)


def test_output_names():
    names, _ = output_terms(2, ("u", "Du", "D2u"))
    assert names == ["u", "Du_1", "Du_2", "D2u_11", "D2u_12", "D2u_22"]
    with pytest.raises(ValueError):
        output_terms(2, ("bogus",))


def test_manufactured_solution_recovered():
    axes = [np.array([0.0, 0.2]), np.array([0.1])]
    times = np.array([0.5, 0.8])
    res = solve_whole_space(PATH, fstar, (axes, times), outputs=("u", "D2u"),
                            support=(np.array([[-3, 3], [-3, 3]]), (0, 1)))
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    ref = ustar(pts[..., None, :], times)
    err = np.max(np.abs(res["u"].values - ref))
    assert err < 1e-5
    assert err <= 10 * res["u"].meta["quad_error"] + 1e-9


def test_packet_route_matches_quadrature():
    pk = Packet((0.1, 0.4), (0.05, 0.01, 0.01, 0.08), (0.0, 0.5), 1.3, (3.0, -2.0), 0.4)
    src = PacketSource([pk])
    axes = [np.array([0.0, 0.3]), np.array([0.2, 0.5])]
    times = np.array([0.35, 0.6])
    a = packet_solution(PATH, src, axes, times, ("u", "Du", "D2u"))
    box = np.array([[-1.4, 1.6], [-1.1, 1.9]])
    b = solve_whole_space(PATH, src, (axes, times), ("u", "Du", "D2u"), support=(box, (0, 0.5)),
                          resolution=0.1)
    for k in ("u", "Du_1", "D2u_12"):
        tol = 10 * (a[k].meta["quad_error"] + b[k].meta["quad_error"]) + 1e-9
        assert np.max(np.abs(a[k].values - b[k].values)) < tol


def test_packet_time_derivative_satisfies_equation():
    src = PacketSource([Packet((0.0, 0.3), (0.04, 0, 0, 0.04), (0.0, 0.6))])
    axes = [np.array([-0.2, 0.1]), np.array([0.3])]
    h = 1e-4
    t = 0.45
    r = packet_solution(PATH, src, axes, np.array([t - h, t, t + h]), ("u", "u_t"))
    fd = (r["u"].values[..., 2] - r["u"].values[..., 0]) / (2 * h)
    assert np.allclose(r["u_t"].values[..., 1], fd, rtol=1e-6, atol=1e-8)


def test_even_source_has_zero_normal_derivative():
    diag = make_path([0, 1], [np.diag([1.0, 0.6])], 0.5, 2)
    src = PacketSource([Packet((0.1, 0.2), (0.03, 0, 0, 0.02), (0, 0.5))], neumann=True)
    r = packet_solution(diag, src, [np.linspace(-1, 1, 5), np.array([0.0])], np.array([0.7]),
                        ("Du",))
    assert np.max(np.abs(r["Du_2"].values)) < 1e-14


def test_one_dimensional_constant_source():
    # f = 1 on (0, T): u(x, T) = T exactly for any space-time kernel of unit mass
    p = constant_path([[0.7]])
    res = solve_whole_space(p, lambda y, s: np.ones(np.shape(y)[:-1]),
                            ([np.array([0.0])], np.array([0.4])),
                            support=(np.array([[-8.0, 8.0]]), (0.0, 0.4)))
    assert res["u"].values.item() == pytest.approx(0.4, abs=1e-6)
