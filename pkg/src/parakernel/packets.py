"""Semi-analytic solutions for Gaussian wave-packet sources.

A packet is

    f(y, s) = amp * h(s) * Re[ exp(i phase + i k.(y - c)) exp(-(y - c)^T W^{-1} (y - c) / 2) ]

with ``h(s) = sin^2(pi (s - s0) / (s1 - s0))`` on its time window.  Writing
``M = W + 2 B(s, t)`` and ``d = x - c - i W k``, the space convolution with the
whole-space kernel is

    sqrt(det W / det M) exp(-k.W k / 2) exp(-d^T M^{-1} d / 2),

so only the ``s``-integral is done numerically.  It has a smooth integrand;
nodes are graded in ``log(w + t - s)`` where ``w`` is the packet's own time
scale.  Derivatives in ``x`` come from the Hermite recursion with complex
arguments.

For a path without normal cross terms, adding the mirrored packet gives an
even source whose solution satisfies ``D_n u = 0`` on ``x_n = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import SampledField
from .kernels import _Hermite
from .quadrature import gauss_legendre
from .solvers import hessian_pairs, output_terms

LOG_STEP = 1.0


@dataclass(frozen=True)
class Packet:
    center: tuple
    cov: tuple
    window: tuple
    amp: float = 1.0
    wavevector: tuple | None = None
    phase: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.center)

    def arrays(self):
        c = np.asarray(self.center, dtype=float)
        W = np.asarray(self.cov, dtype=float).reshape(self.dim, self.dim)
        k = np.zeros(self.dim) if self.wavevector is None else np.asarray(self.wavevector, float)
        return c, W, k

    def profile(self, s):
        s0, s1 = self.window
        s = np.asarray(s, dtype=float)
        inside = (s > s0) & (s < s1)
        return np.where(inside, np.sin(np.pi * (s - s0) / (s1 - s0)) ** 2, 0.0)

    def mirrored(self) -> "Packet":
        """Packet of ``y -> f(R y)`` with ``R`` the mirror in ``x_n = 0``."""
        c, W, k = self.arrays()
        r = np.ones(self.dim)
        r[-1] = -1.0
        Wr = W * np.outer(r, r)
        return Packet(tuple(c * r), tuple(Wr.ravel()), self.window, self.amp,
                      tuple(k * r), self.phase)

    def transformed(self, T) -> "Packet":
        """Packet of ``z -> f(T^{-1} z)``."""
        T = np.asarray(T, dtype=float)
        c, W, k = self.arrays()
        return Packet(tuple(T @ c), tuple((T @ W @ T.T).ravel()), self.window, self.amp,
                      tuple(np.linalg.solve(T, k)), self.phase)

    def __call__(self, y, s):
        c, W, k = self.arrays()
        y = np.asarray(y, dtype=float)
        z = y - c
        q = np.einsum("...i,ij,...j->...", z, np.linalg.inv(W), z)
        wave = np.cos(self.phase + z @ k)
        return self.amp * self.profile(s) * wave * np.exp(-0.5 * q)

    def to_dict(self) -> dict:
        return {"center": list(self.center), "cov": list(self.cov), "window": list(self.window),
                "amp": self.amp, "wavevector": None if self.wavevector is None
                else list(self.wavevector), "phase": self.phase}


@dataclass
class PacketSource:
    """Sum of packets; with ``neumann=True`` every packet is paired with its mirror."""

    packets: list
    neumann: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    def members(self):
        out = list(self.packets)
        if self.neumann:
            out += [p.mirrored() for p in self.packets]
        return out

    def __call__(self, y, s):
        total = 0.0
        for p in self.members():
            total = total + p(y, s)
        return total * np.ones(np.broadcast_shapes(np.shape(y)[:-1], np.shape(s)))


def _time_nodes(path, packet, t, m):
    """GL nodes in ``s`` on ``[s0, min(s1, t)]`` for one packet and output time."""
    s0, s1 = packet.window
    top = min(s1, t)
    if top <= s0:
        return np.zeros(0), np.zeros(0)
    _, W, _ = packet.arrays()
    amax = max(np.linalg.eigvalsh(m_).max() for m_ in path.matrices)
    w = max(np.linalg.eigvalsh(W).min() / (2.0 * amax), 1e-300)
    cuts = set(np.linspace(s0, s1, 9).tolist())
    cuts.update(float(b) for b in path.interior_breakpoints)
    # uniform cuts in log(w + tau), tau = t - s
    lo, hi = np.log(w + t - top), np.log(w + t - s0)
    k = max(int(np.ceil((hi - lo) / LOG_STEP)), 1)
    cuts.update((t - (np.exp(np.linspace(lo, hi, k + 1)) - w)).tolist())
    edges = np.array(sorted(c for c in cuts if s0 <= c <= top) + [s0, top])
    edges = np.unique(np.clip(edges, s0, top))
    gx, gw = gauss_legendre(m)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (a + b) + 0.5 * (b - a) * gx).ravel()
    weights = (0.5 * (b - a) * gw).ravel()
    return nodes, weights


def _packet_terms(path, packet, X, t, terms, m, chunk=4000):
    """``sum_s w h(s) (sum_g c_g D^g conv)(X)`` for one packet, every term."""
    c, W, k = packet.arrays()
    s, ws = _time_nodes(path, packet, t, m)
    out = np.zeros((len(terms), len(X)))
    if len(s) == 0:
        return out
    B = path.integrate_many(s, np.full_like(s, t))
    M = W + 2.0 * B
    Minv = np.linalg.inv(M)
    amp = np.sqrt(np.linalg.det(W) / np.linalg.det(M)) * ws * packet.profile(s)
    pref = packet.amp * np.exp(1j * packet.phase - 0.5 * k @ W @ k)
    wave = bool(np.any(k != 0.0))
    ctil = c + 1j * (W @ k) if wave else c
    if not wave:
        pref = pref.real
    n = len(c)
    for a in range(0, len(X), chunk):
        d = X[a:a + chunk, None, :] - ctil
        v = sum(Minv[None, :, :, b] * d[..., b, None] for b in range(n))
        base = np.exp(-0.5 * np.sum(d * v, axis=-1)) * amp
        herm = _Hermite(v, np.broadcast_to(Minv, v.shape[:1] + Minv.shape))
        for i, term in enumerate(terms):
            acc = 0.0
            for g, coef in term.items():
                acc = acc + coef * (-1.0) ** sum(g) * herm(g)
            out[i, a:a + chunk] = np.real(pref * np.sum(acc * base, axis=1))
    return out


def packet_solution(path, source: PacketSource, axes, times, outputs=("u",), m=6,
                    with_error=True, error_stride=5):
    """Fields ``u``, ``Du_i``, ``D2u_ij``, ``u_t`` and ``f`` on a tensor grid.

    The error estimate compares ``m`` and ``m + 4`` Gauss nodes per time
    panel at every ``error_stride``-th output time and the last one.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    times = np.asarray(times, dtype=float)
    n = path.dim
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    names, terms = output_terms(n, outputs)
    shape = tuple(len(a) for a in axes)
    vals = np.zeros((len(names),) + shape + (len(times),))
    errs = np.zeros(len(names))
    fvals = np.zeros(shape + (len(times),))
    for j, t in enumerate(times):
        fvals[..., j] = source(X, np.full(len(X), t)).reshape(shape)
        for p in source.members():
            fine = _packet_terms(path, p, X, t, terms, m + 4)
            vals[..., j] += fine.reshape((len(names),) + shape)
            if with_error and (j % error_stride == 0 or j == len(times) - 1):
                coarse = _packet_terms(path, p, X, t, terms, m)
                errs = errs + np.max(np.abs(fine - coarse), axis=1, initial=0.0)
    meta = {"route": "gaussian packets", "neumann_image": source.neumann}
    result = {"f": SampledField(axes, times, fvals, "f", dict(meta))}
    for name, v, e in zip(names, vals, errs):
        tag = "D2u" if name.startswith("D2u") else "Du" if name.startswith("Du") else name
        result[name] = SampledField(axes, times, v, tag, {"quad_error": float(e), **meta})
    if "u_t" in outputs:
        A = path.evaluate(times)
        ut = fvals.copy()
        err = 0.0
        for i, jj in hessian_pairs(n):
            key = f"D2u_{i + 1}{jj + 1}"
            mult = 1.0 if i == jj else 2.0
            ut = ut + mult * A[:, i, jj] * result[key].values
            err = err + mult * np.max(np.abs(A[:, i, jj])) * result[key].meta["quad_error"]
        result["u_t"] = SampledField(axes, times, ut, "u_t", {"quad_error": float(err), **meta})
    return result
