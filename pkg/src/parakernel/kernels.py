"""Whole-space Green kernel of ``d_t - a^{ij}(t) D_i D_j`` and its derivatives.

With ``B = int_s^t A`` the kernel is the Gaussian

    G(r) = det(B)^{-1/2} (4 pi)^{-n/2} exp(-(B^{-1} r, r) / 4),   r = x - y,

for ``t > s`` and zero otherwise.  Derivatives are exact: writing
``P = B^{-1} / 2`` and ``v = P r``, the multivariate Hermite polynomials

    H_0 = 1,   H_{g + e_i} = v_i H_g - sum_j g_j P_ij H_{g - e_j}

give ``D_r^g G = (-1)^{|g|} H_g G``.  Since ``G`` depends on ``x - y`` only,
``D_x^a D_y^b G = (-1)^{|b|} D_r^{a+b} G``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousTime, OrderTooHigh

DEFAULT_MAX_ORDER = 4


def multi_indices(n: int, order: int):
    """All multi-indices of length ``n`` with total order exactly ``order``."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), order):
        g = [0] * n
        for i in combo:
            g[i] += 1
        out.append(tuple(g))
    return sorted(set(out), reverse=True)


def multi_indices_upto(n: int, order: int):
    return [g for k in range(order + 1) for g in multi_indices(n, k)]


def _as_index(g, n):
    if g is None:
        return (0,) * n
    g = tuple(int(v) for v in g)
    if len(g) != n or min(g, default=0) < 0:
        raise ValueError(f"bad multi-index {g} for dimension {n}")
    return g


def gaussian_factor(B):
    """Normalisation ``c`` and precision ``P = B^{-1}/2`` for a batch of ``B``."""
    B = np.asarray(B, dtype=float)
    n = B.shape[-1]
    c = np.linalg.det(B) ** -0.5 * (4.0 * np.pi) ** (-0.5 * n)
    P = 0.5 * np.linalg.inv(B)
    return c, P


class _Hermite:
    """Memoised multivariate Hermite polynomials at fixed ``(v, P)``."""

    def __init__(self, v, P):
        self.v = v
        self.P = P
        self.n = v.shape[-1]
        self.cache = {(0,) * self.n: np.ones(v.shape[:-1])}

    def __call__(self, g):
        h = self.cache.get(g)
        if h is not None:
            return h
        i = next(k for k, gk in enumerate(g) if gk > 0)
        gp = list(g)
        gp[i] -= 1
        gp = tuple(gp)
        h = self.v[..., i] * self(gp)
        for j, gj in enumerate(gp):
            if gj:
                gm = list(gp)
                gm[j] -= 1
                h = h - gj * self.P[..., i, j] * self(tuple(gm))
        self.cache[g] = h
        return h


class GaussianDerivatives:
    """Evaluate ``D_r^g G`` for many multi-indices at one batch of ``(B, r)``."""

    def __init__(self, B, r):
        r = np.asarray(r, dtype=float)
        c, P = gaussian_factor(B)
        v = np.einsum("...ij,...j->...i", P, r)
        self.n = r.shape[-1]
        self.value = c * np.exp(-0.5 * np.einsum("...i,...i->...", r, v))
        self._h = _Hermite(v, P)

    def __call__(self, g) -> np.ndarray:
        g = tuple(g)
        return (-1.0) ** sum(g) * self._h(g) * self.value

    def combo(self, terms: dict) -> np.ndarray:
        """``sum_g coeff_g D_r^g G`` for a dict ``{g: coeff}``."""
        out = 0.0
        for g, coef in terms.items():
            if coef != 0.0:
                out = out + coef * self(g)
        return out * np.ones_like(self.value)


def linear_derivative_terms(beta, S):
    """Expand ``D_y^beta [h(x - S y)]`` into ``{g: coeff}`` of ``(D^g h)(x - S y)``.

    Each ``D_{y_k}`` acts as ``-sum_i S_ik d_i`` on ``h``.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    terms = {(0,) * n: 1.0}
    for k, bk in enumerate(beta):
        for _ in range(bk):
            new = {}
            for g, coef in terms.items():
                for i in range(n):
                    if S[i, k] != 0.0:
                        gi = list(g)
                        gi[i] += 1
                        gi = tuple(gi)
                        new[gi] = new.get(gi, 0.0) - coef * S[i, k]
            terms = new
    return terms


def shift_terms(terms: dict, alpha) -> dict:
    return {tuple(a + b for a, b in zip(g, alpha)): c for g, c in terms.items()}


@dataclass(frozen=True)
class KernelQuery:
    """Address of ``D_x^alpha D_y^beta`` of a kernel at ``(x, y; t, s)``."""

    alpha: tuple
    beta: tuple
    x: np.ndarray
    y: np.ndarray
    t: object
    s: object

    @property
    def order(self) -> int:
        return sum(self.alpha) + sum(self.beta)


def _check_order(order, max_order):
    if order > max_order:
        raise OrderTooHigh(f"derivative order {order} exceeds the cap {max_order}")


def _prepare(path, x, y, t, s):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if y.ndim == 0:
        y = y[None]
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    r = x - y
    shape = np.broadcast_shapes(r.shape[:-1], t.shape, s.shape)
    r = np.broadcast_to(r, shape + (path.dim,))
    t = np.broadcast_to(t, shape)
    s = np.broadcast_to(s, shape)
    live = t > s
    B = path.integrate_many(s, np.where(live, t, s + 1.0))
    return r, B, live


def gamma(path, x, y, t, s):
    """Kernel value; zero where ``t <= s``."""
    return gamma_derivative(KernelQuery((0,) * path.dim, (0,) * path.dim, x, y, t, s), path)


def gamma_derivative(query: KernelQuery, path, max_order=DEFAULT_MAX_ORDER):
    n = path.dim
    alpha = _as_index(query.alpha, n)
    beta = _as_index(query.beta, n)
    _check_order(sum(alpha) + sum(beta), max_order)
    r, B, live = _prepare(path, query.x, query.y, query.t, query.s)
    g = tuple(a + b for a, b in zip(alpha, beta))
    val = (-1.0) ** sum(beta) * GaussianDerivatives(B, r)(g)
    return np.where(live, val, 0.0)[()]


def _second_order_contraction(path, query, A, sign, wrt, max_order):
    n = path.dim
    alpha = _as_index(query.alpha, n)
    beta = _as_index(query.beta, n)
    _check_order(sum(alpha) + sum(beta), max_order)
    r, B, live = _prepare(path, query.x, query.y, query.t, query.s)
    gd = GaussianDerivatives(B, r)
    base = tuple(a + b for a, b in zip(alpha, beta))
    out = 0.0
    for i in range(n):
        for j in range(n):
            g = list(base)
            g[i] += 1
            g[j] += 1
            out = out + A[..., i, j] * gd(tuple(g))
    nb = sum(beta) + (2 if wrt == "y" else 0)
    out = sign * (-1.0) ** nb * out
    return np.where(live, out, 0.0)[()]


def gamma_ds(query: KernelQuery, path, max_order=DEFAULT_MAX_ORDER):
    """``d_s D_x^a D_y^b Gamma = -a^{ij}(s) D_{y_i} D_{y_j} D_x^a D_y^b Gamma``."""
    s = np.asarray(query.s, dtype=float)
    if np.any(np.isin(s, path.interior_breakpoints)):
        raise AmbiguousTime("d/ds requested at a coefficient breakpoint")
    A = path.evaluate(s)
    return _second_order_contraction(path, query, A, -1.0, "y", max_order)


def gamma_dt(query: KernelQuery, path, max_order=DEFAULT_MAX_ORDER):
    """``d_t Gamma = a^{ij}(t) D_{x_i} D_{x_j} Gamma`` (forward equation)."""
    t = np.asarray(query.t, dtype=float)
    if np.any(np.isin(t, path.interior_breakpoints)):
        raise AmbiguousTime("d/dt requested at a coefficient breakpoint")
    A = path.evaluate(t)
    return _second_order_contraction(path, query, A, 1.0, "x", max_order)
