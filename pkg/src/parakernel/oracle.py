"""Half-space kernels computed column by column with the finite-difference solver.

For a source point ``(y, s)`` the column ``x -> Gamma(x, y; t, s)`` solves the
forward problem started from a point mass.  The point mass is replaced by the
exact short-time kernel at ``s + tau0`` (whole-space Gaussian minus or plus its
image for the coefficient in force at ``s``), and the rest of the evolution is
marched on a truncated half-strip with the wall condition.  ``y``-derivatives
are central differences of neighbouring columns.  Each value is computed on
two grids (``h`` and ``h/2``, with ``dt = h``) and extrapolated to first
order; ``last_error`` holds the largest difference of the two grids.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .cylinder import DomainChart, ObliqueField, build_operators, generator, step_average
from .errors import ModeUnavailable
from .kernels import GaussianDerivatives


def _faces(n, wall):
    faces = {f"x{k + 1}{side}": "dirichlet" for k in range(n - 1) for side in "-+"}
    faces[f"x{n}+"] = "dirichlet"
    faces[f"x{n}-"] = wall
    return ObliqueField({k: v for k, v in faces.items() if v is not None})


@dataclass
class OracleKernel:
    path: object
    h: float = 0.05
    dt: float | None = None
    reach: float = 7.0
    cells_tau0: float = 3.0
    dy: float | None = None
    refine: bool = True

    def __post_init__(self):
        self.last_error = 0.0
        self._cache = {}

    # -- one column -----------------------------------------------------------
    def _grid(self, pts, s, t, h):
        B = self.path.integrate(s, t).B
        L = self.reach * np.sqrt(max(np.linalg.eigvalsh(B).max(), h * h))
        lo = np.min(pts, axis=0) - L
        hi = np.max(pts, axis=0) + L
        lo[-1] = 0.0
        axes = []
        for k in range(len(lo)):
            m = max(int(np.ceil((hi[k] - lo[k]) / h)), 4)
            axes.append(np.linspace(lo[k], lo[k] + m * h, m + 1))
        return axes

    def _column(self, y, s, times, axes, h, neumann, alpha_set):
        n = self.path.dim
        chart = DomainChart("rectangle", tuple(a[0] for a in axes), tuple(a[-1] for a in axes))
        ops = build_operators(chart, _faces(n, None if neumann else "dirichlet"), axes)
        A0 = self.path.evaluate(s)
        tau0 = (self.cells_tau0 * h) ** 2 / (2.0 * np.linalg.eigvalsh(A0).min())
        t0 = s + tau0
        if t0 >= min(times):
            raise ModeUnavailable("oracle needs t - s larger than its start-up time")
        X = ops.points
        B0 = self.path.integrate(s, t0).B
        b = A0[-1, :-1] / A0[-1, -1]
        S = np.eye(n)
        S[:-1, -1] = -2.0 * b
        S[-1, -1] = -1.0
        img = S @ y
        u = GaussianDerivatives(B0, X - y)((0,) * n)
        u = u + (1.0 if neumann else -1.0) * GaussianDerivatives(B0, X - img)((0,) * n)
        u[ops.pinned] = 0.0
        dt = self.dt or h
        stops = np.unique(np.concatenate([times, self.path.interior_breakpoints]))
        stops = stops[stops > t0]
        out = {}
        cur = t0
        for stop in stops:
            k = max(int(np.ceil((stop - cur) / dt - 1e-9)), 1)
            step = (stop - cur) / k
            for _ in range(k):
                Abar = step_average(self.path, cur, cur + step)
                key = (round(step, 14), Abar.tobytes())
                if key not in self._cache:
                    M = _step_matrix(ops, Abar, step)
                    self._cache = {key: splu(M.tocsc())}
                u = self._cache[key].solve(u)
                cur += step
            if np.any(np.isclose(stop, times)):
                vals = {}
                for alpha in alpha_set:
                    vals[alpha] = _x_derivative(ops, u, alpha)
                out[float(stop)] = vals
        return out

    def _evaluate(self, x, y, t, s, alpha, beta, neumann, h):
        n = self.path.dim
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if sum(alpha) > 2 or sum(beta) > 2:
            raise ModeUnavailable("oracle supports derivatives up to order 2 in x and in y")
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1], t.shape, np.shape(s))
        x = np.broadcast_to(x, shape + (n,)).reshape(-1, n)
        y = np.broadcast_to(y, shape + (n,)).reshape(-1, n)
        t = np.broadcast_to(t, shape).reshape(-1)
        s = np.broadcast_to(np.asarray(s, dtype=float), shape).reshape(-1)
        out = np.zeros(len(x))
        dy = self.dy or 2.0 * h
        stencil = _y_stencil(beta, dy)
        groups = {}
        for i in range(len(x)):
            groups.setdefault((tuple(y[i]), float(s[i])), []).append(i)
        for (yy, ss), idx in groups.items():
            idx = np.array(idx)
            live = t[idx] > ss
            idx = idx[live]
            if len(idx) == 0:
                continue
            times = np.unique(t[idx])
            pts = np.vstack([x[idx], np.array(yy)[None, :]])
            axes = self._grid(pts, ss, times.max(), h)
            acc = np.zeros(len(idx))
            for shift, coef in stencil:
                col = self._column(np.array(yy) + shift, ss, times, axes, h, neumann, [alpha])
                for tt in times:
                    sel = t[idx] == tt
                    field = col[float(tt)][alpha].reshape([len(a) for a in axes])
                    interp = RegularGridInterpolator(axes, field, method="cubic")
                    acc[sel] += coef * interp(x[idx][sel])
            out[idx] = acc
        return out.reshape(shape)[()]

    def _both(self, x, y, t, s, alpha, beta, neumann):
        n = self.path.dim
        alpha = tuple(alpha or (0,) * n)
        beta = tuple(beta or (0,) * n)
        fine = self._evaluate(x, y, t, s, alpha, beta, neumann, self.h / 2 if self.refine else self.h)
        if not self.refine:
            return fine
        coarse = self._evaluate(x, y, t, s, alpha, beta, neumann, self.h)
        # implicit Euler with dt ~ h is first order, so extrapolate; |fine - coarse|
        # bounds the error of the unextrapolated fine value and is kept as the tag
        self.last_error = float(np.max(np.abs(fine - coarse), initial=0.0))
        return 2.0 * fine - coarse

    def dirichlet(self, x, y, t, s, alpha=None, beta=None):
        return self._both(x, y, t, s, alpha, beta, False)

    def neumann(self, x, y, t, s, alpha=None, beta=None):
        return self._both(x, y, t, s, alpha, beta, True)


def _step_matrix(ops, Abar, dt):
    M = sp.identity(ops.size, format="csr") - dt * generator(ops, Abar)
    keep = sp.diags((~ops.pinned).astype(float))
    return (keep @ M + sp.diags(ops.pinned.astype(float))).tocsr()


def _x_derivative(ops, u, alpha):
    order = sum(alpha)
    if order == 0:
        return u
    idx = [k for k, a in enumerate(alpha) for _ in range(a)]
    if order == 1:
        return ops.Dx[idx[0]] @ u
    i, j = sorted(idx)
    return ops.Dxx[(i, j)] @ u


def _y_stencil(beta, dy):
    """Central-difference shifts and weights for ``D_y^beta``."""
    n = len(beta)
    terms = [(np.zeros(n), 1.0)]
    for k, order in enumerate(beta):
        e = np.zeros(n)
        e[k] = dy
        if order == 0:
            continue
        one = [(e, 0.5 / dy), (-e, -0.5 / dy)] if order == 1 else \
            [(e, 1.0 / dy ** 2), (0 * e, -2.0 / dy ** 2), (-e, 1.0 / dy ** 2)]
        terms = [(sh + d, c * w) for sh, c in terms for d, w in one]
    return terms
