"""Finite differences for ``u_t - a^{ij}(t) D_i D_j u + b^i D_i u = f`` on cylinders.

Unknowns live on the nodes of a tensor grid in computational coordinates
``xi``; a :class:`DomainChart` maps them to physical points.  Second-order
differences are used inside.  On a face with the oblique condition
``gamma . Du = 0`` a ghost node is eliminated: the normal derivative is
solved from the condition (jointly for all faces meeting at an edge or
corner) and inserted into the one-sided second difference.  Dirichlet faces
simply pin the boundary nodes to zero.

Time stepping is implicit Euler and uses, on each step, the exact average
``(1/dt) int_{t_k}^{t_{k+1}} A``, so steps that straddle a coefficient jump
are handled without sampling ``A`` at the jump.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .errors import GhostEliminationSingular, LinearSolveFailure
from .fields import SampledField, graded_axis, refine_axis

KINDS = ("rectangle", "half-strip", "graph")


# ---------------------------------------------------------------------------
# geometry

def _power_profile(c, x0, exponent):
    def phi(x, k=0, floor=0.0):
        r = np.asarray(x, dtype=float) - x0
        a = np.abs(r)
        if k == 0:
            return c * a ** exponent
        if k == 1:
            return c * exponent * np.sign(r) * a ** (exponent - 1.0)
        # phi'' blows up at the kink when exponent < 2; ``floor`` caps |x - x0| from below
        with np.errstate(divide="ignore"):
            return c * exponent * (exponent - 1.0) * np.maximum(a, floor) ** (exponent - 2.0)
    return phi


def _spline_profile(knots, values):
    cs = CubicSpline(np.asarray(knots, float), np.asarray(values, float))
    return lambda x, k=0, floor=0.0: cs(x, k)


@dataclass(frozen=True)
class DomainChart:
    """Cylinder base ``Omega`` and its flattening onto a computational box.

    ``rectangle``: the box itself.  ``half-strip``: the box, where only the
    low ``x_n`` face is a physical wall (the rest is artificial truncation).
    ``graph``: ``n = 2``, ``{lower_1 < x_1 < upper_1, phi(x_1) < x_2 < upper_2}``
    with ``phi`` either ``c |x_1 - x0|^{1 + delta}`` or a cubic spline; the map
    ``xi_2 = H (x_2 - phi) / (H - phi)`` with ``H = upper_2`` flattens it.
    """

    kind: str
    lower: tuple
    upper: tuple
    delta: float = 1.0
    profile: dict | None = None
    periodic: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"domain kind must be one of {KINDS}")
        if self.kind == "graph" and len(self.lower) != 2:
            raise ValueError("graph domains are two-dimensional")
        if not self.periodic:
            object.__setattr__(self, "periodic", (False,) * len(self.lower))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def phi(self):
        prof = self.profile or {"type": "power", "c": 0.0, "x0": 0.0}
        if prof.get("type", "power") == "power":
            return _power_profile(float(prof.get("c", 0.0)), float(prof.get("x0", 0.0)),
                                  1.0 + self.delta)
        return _spline_profile(prof["knots"], prof["values"])

    def to_dict(self):
        return {"kind": self.kind, "lower": list(self.lower), "upper": list(self.upper),
                "delta": self.delta, "profile": self.profile, "periodic": list(self.periodic)}

    # maps -------------------------------------------------------------
    def to_physical(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind != "graph":
            return xi
        H = self.upper[1]
        p = self.phi(xi[..., 0])
        x2 = p + xi[..., 1] * (H - p) / H
        return np.stack([xi[..., 0], x2], axis=-1)

    def metric(self, xi, floor=0.0):
        """``J_ki = d xi_k / d x_i`` and ``Q_kij = d^2 xi_k / dx_i dx_j`` at ``xi``."""
        xi = np.asarray(xi, dtype=float)
        n = self.dim
        shape = xi.shape[:-1]
        J = np.broadcast_to(np.eye(n), shape + (n, n)).copy()
        Q = np.zeros(shape + (n, n, n))
        if self.kind == "graph":
            H = self.upper[1]
            x1, e = xi[..., 0], xi[..., 1]
            p, dp, ddp = self.phi(x1), self.phi(x1, 1), self.phi(x1, 2, floor)
            g = H - p
            s = H / g
            c = -dp * (H - e) / g
            J[..., 1, 0] = c
            J[..., 1, 1] = s
            dc_dx1 = -ddp * (H - e) / g - dp ** 2 * (H - e) / g ** 2 + c * dp / g
            Q[..., 1, 0, 0] = dc_dx1
            Q[..., 1, 0, 1] = Q[..., 1, 1, 0] = dp * s / g
        return J, Q

    def volume(self, xi):
        """``|det dx/dxi|``."""
        J, _ = self.metric(xi)
        return 1.0 / np.abs(np.linalg.det(J))

    @property
    def periods(self):
        return [self.upper[k] - self.lower[k] if self.periodic[k] else None
                for k in range(self.dim)]

    def is_wall(self, axis, side):
        if self.periodic[axis]:
            return False
        if self.kind == "half-strip":
            return axis == self.dim - 1 and side == 0
        return True

    def distance(self, x, samples=4000):
        """Distance ``d(x)`` to the physical boundary (walls only for a half-strip)."""
        x = np.asarray(x, dtype=float)
        n = self.dim
        d = np.full(x.shape[:-1], np.inf)
        for k in range(n):
            for side in (0, 1):
                if not self.is_wall(k, side) or (self.kind == "graph" and k == 1 and side == 0):
                    continue
                plane = self.lower[k] if side == 0 else self.upper[k]
                d = np.minimum(d, np.abs(x[..., k] - plane))
        if self.kind == "graph":
            d = np.minimum(d, self._curve_distance(x, samples))
        return d

    def _curve_distance(self, x, samples):
        a, b = self.lower[0], self.upper[0]
        s = np.linspace(a, b, samples)
        curve = np.stack([s, self.phi(s)], axis=1)
        flat = x.reshape(-1, 2)
        _, idx = cKDTree(curve).query(flat)
        h = (b - a) / (samples - 1)
        # local refinement around the nearest sample
        loc = np.clip(s[idx][:, None] + np.linspace(-h, h, 65)[None, :], a, b)
        pts = np.stack([loc, self.phi(loc)], axis=-1)
        dist = np.min(np.linalg.norm(pts - flat[:, None, :], axis=-1), axis=1)
        return dist.reshape(x.shape[:-1])


def load_domain(source) -> DomainChart:
    if isinstance(source, DomainChart):
        return source
    data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    return DomainChart(data["kind"], tuple(data["lower"]), tuple(data["upper"]),
                       float(data.get("delta", 1.0)), data.get("profile"),
                       tuple(data.get("periodic", ())))


def remark_window(delta, p):
    """Admissible weight window ``(1 - delta - 1/p, 1 - 1/p)`` for a C^{1,delta} boundary."""
    return (1.0 - delta - 1.0 / p, 1.0 - 1.0 / p)


@dataclass(frozen=True)
class ObliqueField:
    """Constant field per face; faces are named ``"x1-"``, ``"x1+"``, ... .

    Faces without an entry use the exterior normal (the Neumann condition);
    ``"dirichlet"`` as a face value imposes ``u = 0`` there instead.
    """

    faces: dict = field(default_factory=dict)
    gamma0: float = 1e-3

    def __post_init__(self):
        for key in self.faces:
            name = str(key)
            if not (len(name) >= 3 and name[0] == "x" and name[1:-1].isdigit()
                    and name[-1] in "-+"):
                raise ValueError(f"unknown face {key!r}; faces are named 'x1-', 'x1+', 'x2-', ...")

    def face(self, axis, side):
        return self.faces.get(f"x{axis + 1}{'-+'[side]}")

    def to_dict(self):
        return {"faces": {k: (v if isinstance(v, str) else list(v)) for k, v in self.faces.items()},
                "gamma0": self.gamma0}


def load_oblique(source) -> ObliqueField:
    if source is None:
        return ObliqueField()
    if isinstance(source, ObliqueField):
        return source
    data = source if isinstance(source, dict) else json.loads(Path(source).read_text())
    faces = {k: (v if isinstance(v, str) else tuple(float(c) for c in v))
             for k, v in data.get("faces", {}).items()}
    return ObliqueField(faces, float(data.get("gamma0", 1e-3)))


@dataclass(frozen=True)
class LowerOrder:
    """Bounded drift ``b(x, t)``: a constant vector or a callable ``(x, t) -> (..., n)``."""

    b: object = None
    bound: float | None = None

    def at(self, x, t):
        if self.b is None:
            return None
        if callable(self.b):
            val = np.asarray(self.b(x, t), dtype=float)
        else:
            val = np.broadcast_to(np.asarray(self.b, dtype=float), x.shape)
        if self.bound is not None and np.max(np.abs(val)) > self.bound * (1 + 1e-12):
            raise ValueError("drift exceeds its declared bound")
        return val

    @property
    def constant(self) -> bool:
        return self.b is None or not callable(self.b)


# ---------------------------------------------------------------------------
# 1-D stencils

def _d1_matrix(x, period=None):
    """First derivative: centred inside, second-order one-sided at the ends.

    With ``period`` the nodes cover ``[x_0, x_0 + period)`` and wrap around.
    """
    m = len(x)
    rows, cols, vals = [], [], []
    if period:
        for j in range(m):
            jm, jp = (j - 1) % m, (j + 1) % m
            hm = (x[j] - x[jm]) % period
            hp = (x[jp] - x[j]) % period
            rows += [j] * 3
            cols += [jm, j, jp]
            vals += [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    for j in range(1, m - 1):
        hm, hp = x[j] - x[j - 1], x[j + 1] - x[j]
        rows += [j] * 3
        cols += [j - 1, j, j + 1]
        vals += [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
    for j, sgn, (i0, i1, i2) in ((0, 1, (0, 1, 2)), (m - 1, -1, (m - 1, m - 2, m - 3))):
        h1 = abs(x[i1] - x[i0])
        h2 = abs(x[i2] - x[i0])
        c1 = h2 / (h1 * (h2 - h1))
        c2 = -h1 / (h2 * (h2 - h1))
        rows += [j] * 3
        cols += [i0, i1, i2]
        vals += [sgn * -(c1 + c2), sgn * c1, sgn * c2]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def _d2_matrix(x, period=None):
    """Second derivative on interior nodes (boundary rows left empty)."""
    m = len(x)
    rows, cols, vals = [], [], []
    rng = range(m) if period else range(1, m - 1)
    for j in rng:
        jm, jp = (j - 1) % m, (j + 1) % m
        hm = (x[j] - x[jm]) % period if period else x[j] - x[jm]
        hp = (x[jp] - x[j]) % period if period else x[jp] - x[j]
        rows += [j] * 3
        cols += [jm, j, jp]
        vals += [2 / (hm * (hm + hp)), -2 / (hm * hp), 2 / (hp * (hm + hp))]
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def _kron_axis(mat, k, sizes):
    out = sp.identity(1, format="csr")
    for i, m in enumerate(sizes):
        out = sp.kron(out, mat if i == k else sp.identity(m, format="csr"), format="csr")
    return out


def trapezoid_weights(x, period=None):
    x = np.asarray(x, dtype=float)
    if period:
        h = np.diff(np.append(x, x[0] + period))
        return 0.5 * (h + np.roll(h, 1))
    h = np.diff(x)
    w = np.zeros(len(x))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


# ---------------------------------------------------------------------------
# operators

@dataclass
class Operators:
    """Sparse difference operators on one grid, with boundary closure built in."""

    axes: list
    chart: DomainChart
    G: list            # computational gradient with the oblique closure
    H: dict            # computational second derivatives (k, l), k <= l
    Dx: list           # physical gradient
    Dxx: dict          # physical second derivatives (i, j), i <= j
    pinned: np.ndarray  # Dirichlet nodes
    weights: np.ndarray  # quadrature weights (trapezoid x volume)
    points: np.ndarray   # physical coordinates of the nodes

    @property
    def size(self) -> int:
        return len(self.weights)


def _gamma_tilde(J, gamma):
    return J @ np.asarray(gamma, dtype=float)


def build_operators(chart: DomainChart, oblique: ObliqueField, axes) -> Operators:
    axes = [np.asarray(a, dtype=float) for a in axes]
    n = chart.dim
    sizes = [len(a) for a in axes]
    N = int(np.prod(sizes))
    xi = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(N, n)
    J, Q = chart.metric(xi, floor=0.5 * float(np.min(np.diff(axes[0]))))
    periods = chart.periods
    idx = np.stack(np.meshgrid(*[np.arange(m) for m in sizes], indexing="ij"), axis=-1)
    idx = idx.reshape(N, n)
    D1 = [_kron_axis(_d1_matrix(a, periods[k]), k, sizes) for k, a in enumerate(axes)]
    D2 = [_kron_axis(_d2_matrix(a, periods[k]), k, sizes) for k, a in enumerate(axes)]

    # boundary bookkeeping: for each node, the faces it lies on
    on_face = np.zeros((N, n), dtype=int)  # 0 none, 1 low, 2 high
    for k in range(n):
        if chart.periodic[k]:
            continue
        on_face[idx[:, k] == 0, k] = 1
        on_face[idx[:, k] == sizes[k] - 1, k] = 2
    pinned = np.zeros(N, dtype=bool)
    for k in range(n):
        for side in (0, 1):
            if oblique.face(k, side) == "dirichlet":
                pinned |= on_face[:, k] == side + 1

    # gradient with closure
    G = [D1[k].tolil() for k in range(n)]
    bnodes = np.nonzero(on_face.any(axis=1) & ~pinned)[0]
    D1csr = [d.tocsr() for d in D1]
    for node in bnodes:
        K = [k for k in range(n) if on_face[node, k]]
        Kc = [k for k in range(n) if not on_face[node, k]]
        rows = []
        for k in K:
            side = on_face[node, k] - 1
            gam = oblique.face(k, side)
            # exterior normal of the face, in physical coordinates
            normal = J[node, k] / np.linalg.norm(J[node, k]) * (-1.0 if side == 0 else 1.0)
            gvec = normal if gam is None else np.asarray(gam, dtype=float)
            if float(gvec @ normal) < oblique.gamma0:
                raise GhostEliminationSingular(
                    f"gamma . n = {float(gvec @ normal):.3g} < gamma0 on face x{k + 1}"
                    f"{'-+'[side]} at node {node}")
            rows.append(_gamma_tilde(J[node], gvec))
        Gam = np.array(rows)                    # |K| x n
        A_K = Gam[:, K]
        if abs(np.linalg.det(A_K)) < 1e-12:
            raise GhostEliminationSingular(f"oblique fields are dependent at corner node {node}")
        coef = -np.linalg.solve(A_K, Gam[:, Kc]) if Kc else np.zeros((len(K), 0))
        for a, k in enumerate(K):
            row = sp.csr_matrix((1, N))
            for b, m in enumerate(Kc):
                if coef[a, b] != 0.0:
                    row = row + coef[a, b] * D1csr[m][node]
            G[k][node, :] = row
    G = [g.tocsr() for g in G]

    # second derivatives
    H = {}
    for k in range(n):
        h = D2[k].tolil()
        lowpos = np.nonzero((on_face[:, k] == 1) & ~pinned)[0]
        highpos = np.nonzero((on_face[:, k] == 2) & ~pinned)[0]
        stride = int(np.prod(sizes[k + 1:]))
        a = axes[k]
        for nodes, nb, hh, sgn in ((lowpos, stride, a[1] - a[0], -1.0),
                                   (highpos, -stride, a[-1] - a[-2], 1.0)):
            for node in nodes:
                row = sgn * (2.0 / hh) * G[k][node]
                row = row.tolil()
                row[0, node] += -2.0 / hh ** 2
                row[0, node + nb] += 2.0 / hh ** 2
                h[node, :] = row
        H[(k, k)] = h.tocsr()
    for k in range(n):
        for m in range(k + 1, n):
            onk = on_face[:, k] > 0
            onm = on_face[:, m] > 0
            pa = sp.diags((~onk | onm).astype(float))
            pb = sp.diags((onk & ~onm).astype(float))
            H[(k, m)] = (pa @ (D1[k] @ G[m]) + pb @ (D1[m] @ G[k])).tocsr()

    def Hkl(k, l):
        return H[(min(k, l), max(k, l))]

    Dx = []
    for i in range(n):
        Dx.append(sum(sp.diags(J[:, k, i]) @ G[k] for k in range(n)).tocsr())
    Dxx = {}
    for i in range(n):
        for j in range(i, n):
            op = sp.csr_matrix((N, N))
            for k in range(n):
                for l in range(n):
                    c = J[:, k, i] * J[:, l, j]
                    if np.any(c != 0.0):
                        op = op + sp.diags(c) @ Hkl(k, l)
                if np.any(Q[:, k, i, j] != 0.0):
                    op = op + sp.diags(Q[:, k, i, j]) @ G[k]
            Dxx[(i, j)] = op.tocsr()

    w = np.ones(1)
    for k, a in enumerate(axes):
        w = np.kron(w, trapezoid_weights(a, periods[k]))
    w = w * chart.volume(xi)
    return Operators(axes, chart, G, H, Dx, Dxx, pinned, w, chart.to_physical(xi))


def generator(ops: Operators, Abar, b=None):
    """``L = sum_ij a_ij D_i D_j - b . D`` with ``Abar`` the step-averaged matrix."""
    n = ops.chart.dim
    L = sp.csr_matrix((ops.size, ops.size))
    for (i, j), op in ops.Dxx.items():
        c = Abar[i, j] * (1.0 if i == j else 2.0)
        if c != 0.0:
            L = L + c * op
    if b is not None:
        for i in range(n):
            L = L - sp.diags(b[:, i]) @ ops.Dx[i]
    return L.tocsr()


def step_average(path, t0, t1):
    return path.integrate(t0, t1).B / (t1 - t0)


def assemble_step(path, ops: Operators, lower: LowerOrder | None, dt, t_k):
    """``I - dt L(Abar)`` for the step ``[t_k, t_k + dt]``, with pinned rows set to identity."""
    Abar = step_average(path, t_k, t_k + dt)
    b = lower.at(ops.points, t_k + 0.5 * dt) if lower is not None else None
    M = sp.identity(ops.size, format="csr") - dt * generator(ops, Abar, b)
    if np.any(ops.pinned):
        keep = sp.diags((~ops.pinned).astype(float))
        M = (keep @ M + sp.diags(ops.pinned.astype(float))).tocsr()
    return M, Abar


# ---------------------------------------------------------------------------
# time stepping

@dataclass
class IVBPResult:
    u: SampledField
    ops: Operators
    f_values: np.ndarray
    residuals: list
    dt: float

    def time_derivative(self) -> SampledField:
        v = self.u.values
        ut = np.zeros_like(v)
        ut[..., 1:] = np.diff(v, axis=-1) / self.dt
        ut[..., 0] = ut[..., 1] if v.shape[-1] > 1 else 0.0
        return self.u.with_values(ut, "u_t")

    def second_derivatives(self) -> dict:
        shape = self.u.values.shape
        flat = self.u.values.reshape(-1, shape[-1])
        return {key: self.u.with_values((op @ flat).reshape(shape), "D2u")
                for key, op in self.ops.Dxx.items()}

    def f_field(self) -> SampledField:
        return self.u.with_values(self.f_values, "f")


def _source_values(f, ops, t):
    if f is None:
        return np.zeros(ops.size)
    if isinstance(f, SampledField):
        interp = f.interpolator("linear")
        xi = np.stack(np.meshgrid(*ops.axes, indexing="ij"), axis=-1).reshape(-1, len(ops.axes))
        return interp(xi, np.full(len(xi), t))
    return np.asarray(f(ops.points, np.full(ops.size, t)), dtype=float).reshape(-1)


def solve_ivbp(path, chart, oblique, lower, f, axes, dt, t_final, t_start=0.0, u0=None,
               ops: Operators | None = None):
    """March from ``u(t_start) = u0`` (default 0) to ``t_final`` with step ``dt``.

    ``f`` is a callable ``f(x_physical, t)``, a :class:`SampledField` on the
    computational grid, or ``None``.  Returns the solution at every step.
    """
    oblique = oblique or ObliqueField()
    ops = ops or build_operators(chart, oblique, axes)
    steps = max(int(round((t_final - t_start) / dt)), 1)
    dt = (t_final - t_start) / steps
    times = t_start + dt * np.arange(steps + 1)
    u = np.zeros(ops.size) if u0 is None else np.asarray(u0, dtype=float).reshape(-1).copy()
    u[ops.pinned] = 0.0
    out = np.empty((ops.size, steps + 1))
    fv = np.empty((ops.size, steps + 1))
    out[:, 0] = u
    fv[:, 0] = _source_values(f, ops, times[0])
    cache = {}
    residuals = []
    for k in range(steps):
        t0, t1 = times[k], times[k + 1]
        key = None
        if lower is None or lower.constant:
            key = step_average(path, t0, t1).tobytes()
        if key is not None and key in cache:
            M, lu = cache[key]
        else:
            M, _ = assemble_step(path, ops, lower, dt, t0)
            try:
                lu = splu(M.tocsc())
            except RuntimeError as exc:
                raise LinearSolveFailure(f"factorisation failed at step {k}: {exc}") from exc
            if key is not None:
                cache[key] = (M, lu)
        fk = _source_values(f, ops, t1)
        fv[:, k + 1] = fk
        rhs = u + dt * fk
        rhs[ops.pinned] = 0.0
        u = lu.solve(rhs)
        u[ops.pinned] = 0.0  # identity rows; drop pivoting round-off
        res = float(np.linalg.norm(M @ u - rhs) / max(np.linalg.norm(rhs), 1e-300))
        if not np.all(np.isfinite(u)) or res > 1e-8:
            raise LinearSolveFailure(f"linear solve failed at step {k} (residual {res:.2e})")
        residuals.append(res)
        out[:, k + 1] = u
    shape = tuple(len(a) for a in ops.axes) + (steps + 1,)
    field_u = SampledField(ops.axes, times, out.reshape(shape), "u",
                           {"domain": chart.kind, "dt": dt, "max_residual": max(residuals)})
    return IVBPResult(field_u, ops, fv.reshape(shape), residuals, dt)


def conserved_mass(result: IVBPResult):
    flat = result.u.values.reshape(result.ops.size, -1)
    return result.ops.weights @ flat


# ---------------------------------------------------------------------------
# grids and weighted checks

def graded_box_axes(chart: DomainChart, h_wall, h_max, factor=0.8):
    """Computational axes graded toward every wall (uniform along periodic axes)."""
    axes = []
    for k in range(chart.dim):
        lo, hi = chart.lower[k], chart.upper[k]
        if chart.periodic[k]:
            m = int(np.ceil((hi - lo) / h_max))
            axes.append(np.linspace(lo, hi, m + 1)[:-1])
            continue
        walls = [chart.is_wall(k, 0), chart.is_wall(k, 1)]
        if all(walls):
            a = graded_axis(hi - lo, h_wall, h_max, factor, "both")
        elif walls[0]:
            a = graded_axis(hi - lo, h_wall, h_max, factor, "low")
        elif walls[1]:
            a = graded_axis(hi - lo, h_wall, h_max, factor, "high")
        else:
            m = int(np.ceil((hi - lo) / h_max))
            a = np.linspace(0.0, hi - lo, m + 1)
        axes.append(lo + a)
    return axes


def weighted_coercivity_check(result: IVBPResult, spec, delta=None):
    """Coercive ratio in the distance-weighted norm, with the admissible window.

    ``spec`` is a :class:`WeightedNormSpec` or its dict form; the weight is
    always the distance to the physical boundary, evaluated at cell centres,
    and volumes include the chart Jacobian.
    """
    from dataclasses import replace as _replace
    from .norms import WeightedNormSpec, coercive_ratio
    chart = result.ops.chart
    delta = chart.delta if delta is None else delta
    vol = chart.volume

    def dist(xi):
        return chart.distance(chart.to_physical(xi))

    if isinstance(spec, dict):
        spec = WeightedNormSpec.from_dict({**spec, "weight": "distance"}, distance=dist)
    spec = _replace(spec, weight="distance", distance=dist)
    ratio = coercive_ratio(result.second_derivatives(), result.time_derivative(),
                           result.f_field(), spec, cell_volume=vol)
    lo, hi = remark_window(min(delta, 1.0), spec.p)
    inside = lo < spec.mu < hi
    return {"ratio": ratio.value, "error": ratio.error, "mu": spec.mu, "p": spec.p,
            "q": spec.q, "window": [lo, hi], "inside_window": inside,
            "flag": None if inside else "mu outside the admissible window"}


def refine_axes(axes, chart: DomainChart | None = None):
    """Split every cell in two (including the wrap-around cell of periodic axes)."""
    periods = chart.periods if chart is not None else [None] * len(axes)
    out = []
    for a, per in zip(axes, periods):
        a = np.asarray(a, dtype=float)
        out.append(refine_axis(np.append(a, a[0] + per))[:-1] if per else refine_axis(a))
    return out
