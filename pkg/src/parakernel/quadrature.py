"""Space-time convolution of a source against whole-space kernel derivatives.

For every evaluation point ``(x, t)`` the time integral is split at the
source window and at the coefficient breakpoints.  The segment ending at
``s = t`` uses the substitution ``t - s = exp(w)``, which grades the nodes
geometrically toward the diagonal.  In space, each time node gets a window
of half-width ``WINDOW * sqrt(lambda_max(B))`` around ``x``; the window is
cut into panels at the edges of the source box and each panel carries
Gauss-Legendre nodes.  Derivative terms of order >= 1 integrate
``D^g G * (f(y, s) - f(x, s))``: the moments ``int D^g G dy`` vanish, so the
subtraction removes the non-integrable part of the singularity.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged
from .kernels import GaussianDerivatives

WINDOW = 12.0
WINDOW_PANELS = 6
TAU_FLOOR = 1e-13


@lru_cache(maxsize=None)
def gauss_legendre(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return x, w


def _panel_nodes(edges, m):
    """Gauss nodes/weights on consecutive panels; ``edges`` shape (..., k+1)."""
    gx, gw = gauss_legendre(m)
    a = edges[..., :-1, None]
    b = edges[..., 1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) * 0.5 + half * gx
    weights = half * gw
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _time_nodes(t, s_lo, s_hi, breaks, m):
    """Nodes and weights in ``s`` on ``[s_lo, s_hi]`` with ``s_hi <= t``."""
    cuts = [s_lo] + [b for b in breaks if s_lo < b < s_hi] + [s_hi]
    gx, gw = gauss_legendre(m)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b >= t and b - a > 0:
            # graded toward s = t
            lo = np.log(max((t - b), TAU_FLOOR * max(t - a, 1e-300)))
            hi = np.log(t - a)
            w = 0.5 * (hi + lo) + 0.5 * (hi - lo) * gx
            tau = np.exp(w)
            nodes.append(t - tau)
            weights.append(0.5 * (hi - lo) * gw * tau)
        else:
            nodes.append(0.5 * (a + b) + 0.5 * (b - a) * gx)
            weights.append(0.5 * (b - a) * gw)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class ConvolutionResult:
    values: np.ndarray
    error: np.ndarray

    @property
    def max_error(self) -> float:
        return float(np.max(self.error)) if self.error.size else 0.0


def _source_lattice(box, resolution):
    cuts = []
    for lo, hi in box:
        k = max(int(np.ceil((hi - lo) / resolution)), 1)
        cuts.append(np.linspace(lo, hi, k + 1))
    return cuts


def _dim_nodes(x, half, lattice, m):
    """Per-time-node panel nodes along one axis.

    The window ``[x - half, x + half]`` is cut into ``WINDOW_PANELS`` equal
    panels and additionally at every source-lattice point inside it.
    """
    lo = x - half
    hi = x + half
    base = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, WINDOW_PANELS + 1)
    inside = (lattice[None, :] > lo[:, None]) & (lattice[None, :] < hi[:, None])
    counts = inside.sum(axis=1)
    groups = []
    for k in np.unique(counts):
        idx = np.nonzero(counts == k)[0]
        if k:
            extra = np.stack([lattice[inside[i]] for i in idx])
            edges = np.sort(np.concatenate([base[idx], extra], axis=1), axis=1)
        else:
            edges = base[idx]
        nd, wd = _panel_nodes(edges, m)
        groups.append((idx, nd, wd))
    return groups


def _convolve_point(path, source, x, t, terms, box, window, m_t, m_s, lattice):
    n = path.dim
    s_lo, s_hi = window
    s_hi = min(s_hi, t)
    out = np.zeros(len(terms))
    if s_hi <= s_lo:
        return out
    s, ws = _time_nodes(t, s_lo, s_hi, list(path.interior_breakpoints), m_t)
    live = s < t
    s, ws = s[live], ws[live]
    B = path.integrate_many(s, t)
    half = WINDOW * np.sqrt(np.linalg.eigvalsh(B)[:, -1])
    fx_all = source(np.broadcast_to(x, (len(s), n)), s)
    per_dim = [_dim_nodes(x[i], half, lattice[i], m_s) for i in range(n)]
    # group time nodes by the joint panel structure of all axes
    labels = []
    for groups in per_dim:
        label = np.empty(len(s), dtype=np.int64)
        for g, (idx, _, _) in enumerate(groups):
            label[idx] = g
        labels.append(label)
    joint = np.stack(labels, axis=1)
    for key in np.unique(joint, axis=0):
        sel = np.nonzero(np.all(joint == key, axis=1))[0]
        nodes, weights = [], []
        for groups, g in zip(per_dim, key):
            idx, nd, wd = groups[g]
            pos = np.searchsorted(idx, sel)
            nodes.append(nd[pos])
            weights.append(wd[pos])
        mesh = np.meshgrid(*[np.arange(nd.shape[-1]) for nd in nodes], indexing="ij")
        y = np.stack([nodes[i][:, mesh[i].ravel()] for i in range(n)], axis=-1)
        w = np.prod([weights[i][:, mesh[i].ravel()] for i in range(n)], axis=0)
        w = w * ws[sel, None]
        fy = source(y, s[sel, None])
        fx = fx_all[sel]
        gd = GaussianDerivatives(B[sel, None, :, :], x - y)
        for k, term in enumerate(terms):
            order = max(sum(g) for g in term)
            dens = fy - fx[:, None] if order > 0 else fy
            out[k] += np.sum(w * gd.combo(term) * dens)
    return out


def convolve(path, source, points, times, terms, box, window, m_t=24, m_s=8,
             tol=None, refine=1.5, resolution=None) -> ConvolutionResult:
    """Apply ``sum_g c_g D_r^g G`` (one dict per entry of ``terms``) to ``source``.

    Returns values of shape ``(len(terms), n_points)`` and an a-posteriori
    error estimate from a second, finer quadrature level.  ``resolution``
    is the largest panel length used inside the source box.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    times = np.broadcast_to(np.asarray(times, dtype=float), points.shape[:1])
    box = np.asarray(box, dtype=float)
    if resolution is None:
        resolution = float(np.min(box[:, 1] - box[:, 0])) / 8.0
    lattice = _source_lattice(box, resolution)
    m_t2 = int(np.ceil(refine * m_t))
    m_s2 = int(np.ceil(refine * m_s))
    coarse = np.empty((len(terms), len(points)))
    fine = np.empty_like(coarse)
    for j, (x, t) in enumerate(zip(points, times)):
        coarse[:, j] = _convolve_point(path, source, x, t, terms, box, window, m_t, m_s, lattice)
        fine[:, j] = _convolve_point(path, source, x, t, terms, box, window, m_t2, m_s2, lattice)
    err = np.abs(fine - coarse)
    if tol is not None:
        scale = max(np.max(np.abs(fine)), 1.0)
        if np.max(err, initial=0.0) > tol * scale:
            raise QuadratureNotConverged(
                f"successive refinements differ by {np.max(err):.3e}", fine, err)
    return ConvolutionResult(fine, err)
