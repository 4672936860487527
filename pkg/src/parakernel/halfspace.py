"""Half-space Green functions for the Dirichlet and the ``D_n u = 0`` problems.

Two exact routes are available.

*image*: when ``A(t)`` has no cross terms with the normal direction,
``Gamma^D = G(x - y) - G(x - R y)`` and ``Gamma^N = G(x - y) + G(x - R y)``
with ``R`` the mirror in ``x_n = 0``.

*integral*: ``Gamma^N(x, y) = int_{x_n}^inf D_{y_n} Gamma^D((x', z), y) dz``,
evaluated by Gauss-Legendre panels.  It only needs ``Gamma^D``, which stays
closed-form whenever ``b = A'_n / a_nn`` is the same on every interval: the
oblique mirror ``S y = (y' - 2 y_n b, -y_n)`` then leaves every ``A(t)``
invariant and ``Gamma^D = G(x - y) - G(x - S y)``.

x_n-derivatives of ``Gamma^N`` use ``D_{x_n} Gamma^N = -D_{y_n} Gamma^D``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModeUnavailable, TruncationTooSmall
from .kernels import (DEFAULT_MAX_ORDER, GaussianDerivatives, _as_index, _check_order,
                      linear_derivative_terms, shift_terms)
from .quadrature import convolve, gauss_legendre
from .solvers import assemble_outputs, output_terms, resolve_source, _grid_points

MODES = ("image", "integral", "oracle")


def oblique_mirror(b):
    """Matrix of ``y -> (y' - 2 y_n b, -y_n)``."""
    b = np.asarray(b, dtype=float)
    n = len(b) + 1
    S = np.eye(n)
    S[: n - 1, n - 1] = -2.0 * b
    S[n - 1, n - 1] = -1.0
    return S


def truncation_length(B, tol, tau=None):
    """Distance beyond ``max(x_n, y_n)`` after which the z-integrand is negligible.

    The scale is ``max(sqrt(lambda_max(B)), sqrt(t - s))`` so that the
    upper limit never falls below ``x_n + 8 sqrt(t - s)``.
    """
    scale = np.sqrt(np.linalg.eigvalsh(B)[..., -1])
    if tau is not None:
        scale = np.maximum(scale, np.sqrt(tau))
    return scale * max(8.0, 8.0 * np.sqrt(np.log(1.0 / tol)))


@dataclass
class HalfspaceKernel:
    """Handle for ``Gamma^D`` and ``Gamma^N`` of one coefficient path.

    ``truncation`` overrides the upper limit ``Z`` of the z-integral; by
    default it follows :func:`truncation_length`.  The last z-integral
    records its tail bound in ``last_tail``.
    """

    path: object
    mode: str = "auto"
    tol: float = 1e-12
    truncation: float | None = None
    nodes_per_panel: int = 10
    max_order: int = DEFAULT_MAX_ORDER
    oracle_options: dict | None = None

    def __post_init__(self):
        n = self.path.dim
        b = self.path.normal_shear()
        if self.mode == "auto":
            self.mode = "image" if self.path.is_reflection_symmetric() else (
                "integral" if b is not None else "oracle")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "image" and not self.path.is_reflection_symmetric():
            raise ModeUnavailable("image mode needs a_in(t) = 0 for i < n")
        self.shear = b
        self.S = oblique_mirror(b) if b is not None else None
        if self.mode == "integral" and b is None:
            raise ModeUnavailable(
                "integral mode needs a closed-form Dirichlet kernel; the normal "
                "shear A'_n/a_nn changes between intervals (use mode='oracle')")
        self.last_tail = 0.0
        self.last_error = 0.0
        self._oracle = None
        if n < 1:
            raise ValueError("dimension must be positive")

    # -- helpers -----------------------------------------------------------
    def _setup(self, x, y, t, s):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1], t.shape, s.shape)
        n = self.path.dim
        x = np.broadcast_to(x, shape + (n,))
        y = np.broadcast_to(y, shape + (n,))
        t = np.broadcast_to(t, shape)
        s = np.broadcast_to(s, shape)
        B = self.path.integrate_many(s, np.where(t > s, t, s + 1.0))
        self._tau = np.where(t > s, t - s, 1.0)
        return x, y, B, t > s

    def _oracle_kernel(self):
        if self._oracle is None:
            from .oracle import OracleKernel
            self._oracle = OracleKernel(self.path, **(self.oracle_options or {}))
        return self._oracle

    # -- Dirichlet -----------------------------------------------------------
    def _dirichlet_closed(self, alpha, beta, x, y, B):
        n = self.path.dim
        g = tuple(a + b for a, b in zip(alpha, beta))
        direct = (-1.0) ** sum(beta) * GaussianDerivatives(B, x - y)(g)
        ys = np.einsum("ij,...j->...i", self.S, y)
        image = GaussianDerivatives(B, x - ys).combo(
            shift_terms(linear_derivative_terms(beta, self.S), alpha))
        return direct - image

    def dirichlet(self, x, y, t, s, alpha=None, beta=None):
        """``D_x^alpha D_y^beta Gamma^D(x, y; t, s)``; zero for ``t <= s``."""
        n = self.path.dim
        alpha = _as_index(alpha, n)
        beta = _as_index(beta, n)
        _check_order(sum(alpha) + sum(beta), self.max_order + 2)
        if self.mode == "oracle":
            return self._oracle_kernel().dirichlet(x, y, t, s, alpha, beta)
        x, y, B, live = self._setup(x, y, t, s)
        return np.where(live, self._dirichlet_closed(alpha, beta, x, y, B), 0.0)[()]

    # -- Neumann ---------------------------------------------------------------
    def neumann(self, x, y, t, s, alpha=None, beta=None, route=None):
        """``D_x^alpha D_y^beta Gamma^N``; ``route`` in {None, "image", "integral"}."""
        n = self.path.dim
        alpha = _as_index(alpha, n)
        beta = _as_index(beta, n)
        _check_order(sum(alpha) + sum(beta), self.max_order + 2)
        route = route or self.mode
        if route == "oracle":
            return self._oracle_kernel().neumann(x, y, t, s, alpha, beta)
        if route == "image" and not self.path.is_reflection_symmetric():
            raise ModeUnavailable("image route needs a reflection-symmetric path")
        x, y, B, live = self._setup(x, y, t, s)
        if route == "image":
            R = oblique_mirror(np.zeros(n - 1))
            g = tuple(a + b for a, b in zip(alpha, beta))
            direct = (-1.0) ** sum(beta) * GaussianDerivatives(B, x - y)(g)
            yr = np.einsum("ij,...j->...i", R, y)
            image = GaussianDerivatives(B, x - yr).combo(
                shift_terms(linear_derivative_terms(beta, R), alpha))
            return np.where(live, direct + image, 0.0)[()]
        if self.S is None:
            raise ModeUnavailable("integral route needs a closed-form Dirichlet kernel")
        if alpha[-1] >= 1:
            a = alpha[:-1] + (alpha[-1] - 1,)
            b = beta[:-1] + (beta[-1] + 1,)
            val = -self._dirichlet_closed(a, b, x, y, B)
            return np.where(live, val, 0.0)[()]
        val = self._z_integral(alpha, beta, x, y, B)
        return np.where(live, val, 0.0)[()]

    def _z_integral(self, alpha, beta, x, y, B, m=None, chunk_nodes=2_000_000):
        """``int_{x_n}^Z D_x^alpha D_y^{beta + e_n} Gamma^D((x', z), y) dz``."""
        n = self.path.dim
        m = m or self.nodes_per_panel
        b = beta[:-1] + (beta[-1] + 1,)
        shape = x.shape[:-1]
        x = x.reshape(-1, n)
        y = y.reshape(-1, n)
        B = B.reshape(-1, n, n)
        eig = np.linalg.eigvalsh(B)
        h = 0.75 * np.sqrt(eig[:, 0])
        L = truncation_length(B, self.tol, self._tau.reshape(-1))
        xn = x[:, -1]
        yn = y[:, -1]
        if self.truncation is not None:
            Z = np.full_like(xn, float(self.truncation))
        else:
            Z = np.maximum(xn, yn) + L
        K = int(np.ceil(np.max(L / h, initial=1.0)))
        k = np.arange(0, K + 1)
        gx, gw = gauss_legendre(m)
        per_probe = (3 * K + 3) * m
        step = max(chunk_nodes // per_probe, 1)
        total = np.empty(len(x))
        absint = np.empty(len(x))
        for c0 in range(0, len(x), step):
            sl = slice(c0, c0 + step)
            xs, ys_, hs, Zs, xns, yns = x[sl], y[sl], h[sl], Z[sl], xn[sl], yn[sl]
            fan_x = xns[:, None] + k * hs[:, None]
            fan_y = yns[:, None] + np.concatenate([-k[::-1], k[1:]]) * hs[:, None]
            edges = np.concatenate([xns[:, None], fan_x, fan_y, Zs[:, None]], axis=-1)
            edges = np.sort(np.clip(edges, xns[:, None], Zs[:, None]), axis=-1)
            # adjacent duplicates give empty panels, which carry zero weight
            lo = edges[:, :-1, None]
            hi = edges[:, 1:, None]
            z = (0.5 * (lo + hi) + 0.5 * (hi - lo) * gx).reshape(len(xs), -1)
            w = (0.5 * (hi - lo) * gw).reshape(len(xs), -1)
            xz = np.repeat(xs[:, None, :], z.shape[1], axis=1)
            xz[..., -1] = z
            integrand = self._dirichlet_closed(alpha, b, xz, ys_[:, None, :], B[sl, None])
            total[sl] = np.sum(w * integrand, axis=-1)
            absint[sl] = np.sum(w * np.abs(integrand), axis=-1)
        # Gaussian tail beyond Z: integrand at Z times the largest decay length
        xZ = x.copy()
        xZ[:, -1] = Z
        at_Z = np.abs(self._dirichlet_closed(alpha, b, xZ, y, B))
        tail = at_Z * np.sqrt(eig[:, -1])
        scale = np.maximum(np.abs(total), 1e-3 * absint)
        self.last_tail = float(np.max(tail / np.maximum(scale, 1e-300), initial=0.0))
        if self.truncation is not None and self.last_tail > max(self.tol, 1e-8) * 1e3:
            raise TruncationTooSmall(
                f"tail bound {self.last_tail:.3e} exceeds tolerance at Z={self.truncation}")
        return total.reshape(shape)

    def neumann_ds(self, x, y, t, s, alpha=None, beta=None, route=None):
        """``d_s D_x^alpha D_y^beta Gamma^N = -a^{ij}(s) D_{y_i} D_{y_j} (...)``."""
        from .errors import AmbiguousTime
        n = self.path.dim
        alpha = _as_index(alpha, n)
        beta = _as_index(beta, n)
        s_arr = np.asarray(s, dtype=float)
        if np.any(np.isin(s_arr, self.path.interior_breakpoints)):
            raise AmbiguousTime("d/ds requested at a coefficient breakpoint")
        A = self.path.evaluate(s_arr)
        out = 0.0
        for i in range(n):
            for j in range(n):
                bb = list(beta)
                bb[i] += 1
                bb[j] += 1
                out = out - A[..., i, j] * self.neumann(x, y, t, s, alpha, tuple(bb), route)
        return out

    def dirichlet_ds(self, x, y, t, s, alpha=None, beta=None):
        from .errors import AmbiguousTime
        n = self.path.dim
        alpha = _as_index(alpha, n)
        beta = _as_index(beta, n)
        s_arr = np.asarray(s, dtype=float)
        if np.any(np.isin(s_arr, self.path.interior_breakpoints)):
            raise AmbiguousTime("d/ds requested at a coefficient breakpoint")
        A = self.path.evaluate(s_arr)
        out = 0.0
        for i in range(n):
            for j in range(n):
                bb = list(beta)
                bb[i] += 1
                bb[j] += 1
                out = out - A[..., i, j] * self.dirichlet(x, y, t, s, alpha, tuple(bb))
        return out


# ---------------------------------------------------------------------------
# oblique boundary fields

@dataclass(frozen=True)
class ObliqueShear:
    """Change of variables ``z = T x`` turning ``gamma . Du = 0`` into ``D_n v = 0``.

    ``T`` keeps ``x_n`` and maps ``x' -> x' - (gamma'/gamma_n) x_n``.
    """

    gamma: tuple

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g[-1] == 0:
            # gamma . Du = 0 is unchanged by gamma -> -gamma, so only gamma_n = 0 is excluded
            raise ValueError("oblique field is tangent to the wall (gamma_n = 0)")

    @property
    def T(self):
        g = np.asarray(self.gamma, dtype=float)
        n = len(g)
        T = np.eye(n)
        T[: n - 1, n - 1] = -g[:-1] / g[-1]
        return T

    def forward(self, x):
        return np.einsum("ij,...j->...i", self.T, np.asarray(x, dtype=float))

    def backward(self, z):
        return np.einsum("ij,...j->...i", np.linalg.inv(self.T), np.asarray(z, dtype=float))

    def transform_path(self, path):
        return path.congruence(self.T)


def load_shear(source):
    import json
    from pathlib import Path
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{") and Path(text).exists():
            text = Path(text).read_text()
        data = json.loads(text)
    return ObliqueShear(tuple(float(v) for v in data["gamma"]))


# ---------------------------------------------------------------------------
# solution operators

def _extended_box(box, S):
    corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(len(box), -1).T
    img = corners @ S.T
    allp = np.concatenate([corners, img])
    return np.stack([allp.min(axis=0), allp.max(axis=0)], axis=1)


def _reflected(source, S, sign):
    """``z -> source(z)`` above the wall, ``sign * source(S z)`` below."""
    def ext(z, s):
        z = np.asarray(z, dtype=float)
        up = z[..., -1] > 0
        zs = np.einsum("ij,...j->...i", S, z)
        return np.where(up, source(z, s), sign * source(zs, s))
    return ext


def _reflected_vector(sources, S):
    """Component functions of ``z -> F(z)`` above, ``-S^T F(S z)`` below."""
    n = len(sources)
    out = []
    for i in range(n):
        def comp(z, s, i=i):
            z = np.asarray(z, dtype=float)
            up = z[..., -1] > 0
            zs = np.einsum("ij,...j->...i", S, z)
            below = 0.0
            for k in range(n):
                if S[k, i] != 0.0:
                    below = below - S[k, i] * sources[k](zs, s)
            return np.where(up, sources[i](z, s), below)
        out.append(comp)
    return out


def _require_closed_form(handle, what):
    if handle.mode == "oracle" or handle.S is None:
        raise ModeUnavailable(f"{what} needs a closed-form kernel (image or sheared image)")


def solve_oblique(handle, f, eval_grid, outputs=("u",), support=None, gamma=None,
                  m_t=24, m_s=8, tol=None, resolution=None):
    """Solution ``u = int int Gamma^N f`` of the problem with ``D_n u = 0`` on the wall.

    With ``gamma`` the boundary condition is ``gamma . Du = 0``; it is reduced
    to ``D_n v = 0`` by :class:`ObliqueShear`, and derivatives are mapped back.
    """
    src_x, box, window = resolve_source(f, support)
    source = src_x
    path = orig_path = handle.path
    shear = None
    if gamma is not None:
        shear = ObliqueShear(tuple(gamma))
        path = shear.transform_path(path)
        source = lambda z, s: src_x(shear.backward(z), s)  # noqa: E731
        box = _extended_box(box, shear.T)
    if not path.is_reflection_symmetric():
        raise ModeUnavailable("volume potentials of Gamma^N need the image route "
                              "(reflection-symmetric path after the shear)")
    n = path.dim
    R = oblique_mirror(np.zeros(n - 1))
    ext = _reflected(source, R, 1.0)
    ebox = _extended_box(box, R)
    axes, times, pts, tt = _grid_points(eval_grid)
    zpts = pts if shear is None else shear.forward(pts)
    names, terms = output_terms(n, [o for o in outputs])
    res = convolve(path, ext, zpts, tt, terms, ebox, window, m_t=m_t, m_s=m_s, tol=tol,
                   resolution=resolution)
    values, errors = res.values, res.error
    if shear is not None:
        values, errors = _map_back(names, values, errors, shear.T, n)
        return assemble_outputs(orig_path, src_x, names, values, errors, eval_grid, outputs,
                                {"route": "oblique image", "gamma": [float(g) for g in gamma]})
    return assemble_outputs(path, ext, names, values, errors, eval_grid, outputs,
                            {"route": "neumann image"})


def _map_back(names, values, errors, T, n):
    """Chain rule from ``z = T x``: ``Du = T^T Dv``, ``D^2u = T^T D^2v T``."""
    values = values.copy()
    errors = errors.copy()
    grad = [names.index(f"Du_{i + 1}") for i in range(n)] if "Du_1" in names else None
    if grad:
        v = values[grad]
        e = errors[grad]
        values[grad] = T.T @ v
        errors[grad] = np.abs(T.T) @ e
    if "D2u_11" in names:
        H = np.empty((n, n, values.shape[1]))
        E = np.empty_like(H)
        for i in range(n):
            for j in range(i, n):
                k = names.index(f"D2u_{i + 1}{j + 1}")
                H[i, j] = H[j, i] = values[k]
                E[i, j] = E[j, i] = errors[k]
        Hx = np.einsum("ki,klp,lj->ijp", T, H, T)
        Ex = np.einsum("ki,klp,lj->ijp", np.abs(T), E, np.abs(T))
        for i in range(n):
            for j in range(i, n):
                k = names.index(f"D2u_{i + 1}{j + 1}")
                values[k] = Hx[i, j]
                errors[k] = Ex[i, j]
    return values, errors


def solve_dirichlet_divform(handle, f0, F, eval_grid, outputs=("u", "Du"), support=None,
                            m_t=24, m_s=8, tol=None, resolution=None):
    """Weak solution ``u = int int (Gamma^D f0 - D_y Gamma^D . F) dy ds`` with ``u = 0`` on the wall.

    ``f0`` and the components of ``F`` are callables (or ``None`` for zero)
    sharing ``support``; ``Du`` differentiates the kernel under the integral.
    """
    _require_closed_form(handle, "solve_dirichlet_divform")
    path = handle.path
    n = path.dim
    S = handle.S
    if support is None:
        raise ValueError("support=(box, (s0, s1)) is required")
    box = np.asarray(support[0], dtype=float)
    window = tuple(support[1])
    zero = lambda y, s: np.zeros(np.shape(y)[:-1])  # noqa: E731
    f0 = f0 or zero
    F = [c or zero for c in (F or [None] * n)]
    ebox = _extended_box(box, S)
    axes, times, pts, tt = _grid_points(eval_grid)
    names, base_terms = output_terms(n, outputs)
    total = np.zeros((len(names), len(pts)))
    err = np.zeros_like(total)
    jobs = [(_reflected(f0, S, -1.0), {})]
    for i, comp in enumerate(_reflected_vector(F, S)):
        jobs.append((comp, {i: 1}))
    for src, extra in jobs:
        terms = []
        for term in base_terms:
            shifted = {}
            for g, c in term.items():
                gg = list(g)
                for i, k in extra.items():
                    gg[i] += k
                shifted[tuple(gg)] = c
            terms.append(shifted)
        res = convolve(path, src, pts, tt, terms, ebox, window, m_t=m_t, m_s=m_s, tol=tol,
                       resolution=resolution)
        total += res.values
        err += res.error
    return assemble_outputs(path, zero, names, total, err, eval_grid,
                            [o for o in outputs if o != "u_t"], {"route": "dirichlet image"})
