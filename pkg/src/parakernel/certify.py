"""Certification of pointwise Gaussian bounds for kernels and their derivatives.

A bound template reads

    |K(x, y; t, s)| <= C R_x^{e_x} R_y^{e_y} (t - s)^{-p} exp(-sigma |x - y|^2 / (t - s))

with ``R_x = x_n / (x_n + sqrt(t - s))``.  Probes are log-spaced in the
scale-invariant coordinates ``tau = t - s``, ``xi = x_n / sqrt(tau)``,
``eta = y_n / sqrt(tau)`` and the tangential offset ``rho_t`` (in units of
``sqrt(tau)``), with ``|x - y| <= 8 sqrt(tau)``.

``sigma`` is fitted from the kernel alone: with ``k = |K| tau^p`` and
``K0 = max k``, the largest admissible decay rate is
``sigma_sup = min_{rho >= 2} log(K0 / k) / rho^2`` and the fit uses half of
it.  ``C`` is then the largest ratio.  The verdict is PASS when, along every
coordinate, the maximum of the log-ratio over the other coordinates does not
grow toward either edge of the probe grid by more than ``SLOPE_TOL`` per unit
of log-coordinate.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import InsufficientProbes, UnboundedRatio
from .kernels import KernelQuery, gamma_derivative, multi_indices_upto
from .paths import make_path
from .reports import SweepReport

SLOPE_TOL = 0.05
KERNELS = ("gamma", "dirichlet", "neumann", "ds-neumann")


def dirichlet_exponent(k, eps):
    return 1.0 - k if k <= 1 else 2.0 - k - eps


def neumann_x_exponent(k, eps):
    if k == 0:
        return 0.0
    if k <= 2:
        return 2.0 - k
    return 3.0 - k - eps


def neumann_y_exponent(k, eps):
    return 0.0 if k == 0 else 1.0 - k - eps


@dataclass(frozen=True)
class BoundTemplate:
    kernel: str
    alpha: tuple
    beta: tuple
    time_power: float
    rx_power: float = 0.0
    ry_power: float = 0.0
    epsilon: float = 0.1
    C: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not 0.0 < self.epsilon <= 0.5:
            raise ValueError("epsilon must lie in (0, 1/2]")

    def inflated(self, which: str, by: float = 1.0) -> "BoundTemplate":
        """Template with ``rx_power`` or ``ry_power`` raised by ``by``."""
        key = {"x": "rx_power", "y": "ry_power"}[which]
        return replace(self, **{key: getattr(self, key) + by})

    def to_dict(self):
        return asdict(self)


def standard_template(kernel, alpha, beta, epsilon=0.1) -> BoundTemplate:
    """Exponents of the known bounds for the given kernel and derivative."""
    alpha = tuple(int(a) for a in alpha)
    beta = tuple(int(b) for b in beta)
    n = len(alpha)
    order = sum(alpha) + sum(beta)
    tp = (n + order) / 2.0
    if kernel == "gamma":
        return BoundTemplate(kernel, alpha, beta, tp, 0.0, 0.0, epsilon)
    if kernel == "dirichlet":
        return BoundTemplate(kernel, alpha, beta, tp, dirichlet_exponent(alpha[-1], epsilon),
                             dirichlet_exponent(beta[-1], epsilon), epsilon)
    if kernel == "neumann":
        return BoundTemplate(kernel, alpha, beta, tp, neumann_x_exponent(alpha[-1], epsilon),
                             neumann_y_exponent(beta[-1], epsilon), epsilon)
    return BoundTemplate(kernel, alpha, beta, tp + 1.0, neumann_x_exponent(alpha[-1], epsilon),
                         -1.0 - beta[-1] - epsilon, epsilon)


@dataclass(frozen=True)
class ProbeSpec:
    tau_range: tuple = (1e-4, 1e2)
    n_tau: int = 13
    wall_range: tuple = (1e-3, 1e3)
    n_wall: int = 13
    rho_max: float = 8.0
    n_rho: int = 7
    rho_min: float = 1e-2
    n_directions: int = 8
    s0: float = 0.0

    def to_dict(self):
        return asdict(self)

    def taus(self):
        return np.geomspace(*self.tau_range, self.n_tau)

    def walls(self):
        return np.geomspace(*self.wall_range, self.n_wall)

    def rhos(self):
        return np.geomspace(self.rho_min, self.rho_max, self.n_rho)


def _directions(n, count):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    out = []
    for i in range(n):
        for sgn in (1.0, -1.0):
            e = np.zeros(n)
            e[i] = sgn
            out.append(e)
    for signs in np.ndindex(*([2] * n)):
        v = np.where(np.array(signs) == 0, 1.0, -1.0)
        out.append(v / np.sqrt(n))
    return np.array(out[: max(count, 2 * n)])


@dataclass
class ProbeData:
    """Kernel magnitudes at probes with their scale-invariant coordinates."""

    kernel: str
    alpha: tuple
    beta: tuple
    values: np.ndarray
    tau: np.ndarray
    rho: np.ndarray
    coords: dict
    grids: dict
    path_description: str
    spec: dict = field(default_factory=dict)


def multiscale_path(n, nu=0.5, shear=0.4, seed=0, diagonal=False):
    """Path with breakpoints at every half decade of ``t`` in ``[1e-3, 1]``.

    Outside that range the coefficients are constant, so the kernel is exactly
    self-similar for ``t - s < 1e-3`` (with ``s = 0``) and asymptotically so
    for ``t - s >> 1``; the edges of the probe grid then see no coefficient
    structure.
    Off-diagonal entries couple only ``x_n`` with ``x'`` through a fixed
    ratio ``shear = a_in / a_nn``, so the oblique mirror construction stays
    exact while the magnitudes change from interval to interval.
    """
    rng = np.random.default_rng(seed)
    bps = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 7)])
    mats = []
    b = np.zeros(n - 1) if diagonal or n == 1 else np.full(n - 1, shear / np.sqrt(n - 1))
    for _ in range(len(bps) - 1):
        while True:
            d = np.exp(rng.uniform(np.log(nu), np.log(1.0 / nu), n))
            A = np.diag(d)
            if n > 1:
                A[:-1, -1] = A[-1, :-1] = b * d[-1]
                A[:-1, :-1] += np.outer(b, b) * d[-1]
            ev = np.linalg.eigvalsh(A)
            if ev.min() >= nu and ev.max() <= 1.0 / nu:
                break
        mats.append(A)
    return make_path(bps, mats, nu, n)


def generate_probes(kernel, n, spec: ProbeSpec):
    """Probe points ``x, y, t, s`` and their coordinates."""
    taus = spec.taus()
    rhos = spec.rhos()
    rows = []
    if kernel == "gamma":
        dirs = _directions(n, spec.n_directions)
        rho_all = np.concatenate([[0.0], rhos])
        for it, tau in enumerate(taus):
            for ir, rho in enumerate(rho_all):
                for d in (dirs if rho > 0 else dirs[:1]):
                    rows.append((it, ir, 0, 0, tau, np.zeros(n), -rho * np.sqrt(tau) * d, rho))
        grids = {"tau": taus, "rho": rho_all}
        names = ("tau", "rho")
    else:
        walls = spec.walls()
        if n > 1:
            tdirs = _directions(n - 1, spec.n_directions)
            rho_t = np.concatenate([[0.0], rhos])
        else:
            tdirs = np.zeros((1, 0))
            rho_t = np.array([0.0])
        for it, tau in enumerate(taus):
            st = np.sqrt(tau)
            for ix, xi in enumerate(walls):
                for iy, eta in enumerate(walls):
                    if abs(xi - eta) > spec.rho_max:
                        continue
                    for ir, r in enumerate(rho_t):
                        rho = np.hypot(r, xi - eta)
                        if rho > spec.rho_max:
                            continue
                        for d in (tdirs if r > 0 else tdirs[:1]):
                            x = np.zeros(n)
                            x[-1] = xi * st
                            y = np.zeros(n)
                            y[:-1] = r * st * d
                            y[-1] = eta * st
                            rows.append(((it, ix, iy, ir), tau, x, y, rho))
        grids = {"tau": taus, "xi": walls, "eta": walls, "rho_t": rho_t}
        names = ("tau", "xi", "eta", "rho_t")
        idx = np.array([r[0] for r in rows])
        tau = np.array([r[1] for r in rows])
        x = np.array([r[2] for r in rows])
        y = np.array([r[3] for r in rows])
        rho = np.array([r[4] for r in rows])
        return x, y, tau, rho, {k: idx[:, i] for i, k in enumerate(names)}, grids
    idx = np.array([[r[0], r[1]] for r in rows])
    tau = np.array([r[4] for r in rows])
    x = np.array([r[5] for r in rows])
    y = np.array([r[6] for r in rows])
    rho = np.array([r[7] for r in rows])
    return x, y, tau, rho, {k: idx[:, i] for i, k in enumerate(names)}, grids


def evaluate_kernel(kernel, path, alpha, beta, x, y, t, s, mode="auto"):
    if kernel == "gamma":
        return gamma_derivative(KernelQuery(alpha, beta, x, y, t, s), path)
    from .halfspace import HalfspaceKernel
    h = HalfspaceKernel(path, mode=mode)
    if kernel == "dirichlet":
        return h.dirichlet(x, y, t, s, alpha, beta)
    if kernel == "neumann":
        return h.neumann(x, y, t, s, alpha, beta)
    return h.neumann_ds(x, y, t, s, alpha, beta)


def probe_kernel(kernel, path, alpha, beta, spec: ProbeSpec | None = None, mode="auto"):
    spec = spec or ProbeSpec()
    x, y, tau, rho, coords, grids = generate_probes(kernel, path.dim, spec)
    s = np.full(len(tau), spec.s0)
    vals = evaluate_kernel(kernel, path, alpha, beta, x, y, s + tau, s, mode)
    return ProbeData(kernel, tuple(alpha), tuple(beta), np.abs(np.asarray(vals)), tau, rho,
                     coords, grids, path.describe(), spec.to_dict())


def _r(coord):
    """``R = x_n / (x_n + sqrt(tau))`` written in ``coord = x_n / sqrt(tau)``."""
    return coord / (1.0 + coord)


def fit_sigma(data: ProbeData, time_power):
    """``(sigma, sigma_sup)`` from the Gaussian decay of ``|K| tau^p``."""
    k = data.values * data.tau ** time_power
    pos = k > 0
    far = pos & (data.rho >= 2.0)
    if not np.any(far):
        raise InsufficientProbes("no probes with |x - y| >= 2 sqrt(t - s) and nonzero kernel")
    K0 = np.max(k)
    sup = float(np.min(np.log(K0 / k[far]) / data.rho[far] ** 2))
    return 0.5 * sup, sup


def log_ratio(data: ProbeData, template: BoundTemplate, sigma):
    k = data.values * data.tau ** template.time_power
    with np.errstate(divide="ignore"):
        lr = np.log(k) + sigma * data.rho ** 2
    if data.kernel != "gamma":
        xi = data.grids["xi"][data.coords["xi"]]
        eta = data.grids["eta"][data.coords["eta"]]
        lr = lr - template.rx_power * np.log(_r(xi)) - template.ry_power * np.log(_r(eta))
    return lr


def edge_slopes(data: ProbeData, lr):
    """Outward growth of the log-ratio envelope at both ends of every coordinate."""
    out = {}
    envelopes = {}
    for name, grid in data.grids.items():
        idx = data.coords[name]
        env = np.full(len(grid), -np.inf)
        np.maximum.at(env, idx, lr)
        envelopes[name] = env
        usable = np.nonzero((grid > 0) & np.isfinite(env))[0]
        if len(usable) < 3:
            continue
        lg = np.log(grid[usable])
        e = env[usable]
        out[(name, "low")] = float((e[0] - e[1]) / (lg[1] - lg[0]))
        out[(name, "high")] = float((e[-1] - e[-2]) / (lg[-1] - lg[-2]))
    return out, envelopes


def certify(data: ProbeData, template: BoundTemplate, sigma=None) -> SweepReport:
    for name, grid in data.grids.items():
        # a single value means the direction does not exist (e.g. tangential offsets in 1-D)
        if len(grid) == 2 or (len(grid) < 3 and len(data.grids) == 1):
            raise InsufficientProbes(f"coordinate {name} has fewer than 3 grid values")
    if sigma is None:
        sigma, sup = fit_sigma(data, template.time_power)
    else:
        sup = None
    if sup is not None and not sup > 0:
        verdict, worst = "FAIL", {"direction": "rho", "edge": "high", "slope": float("inf")}
        lr = log_ratio(data, template, max(sigma, 0.0))
        slopes, envelopes = edge_slopes(data, lr)
    else:
        lr = log_ratio(data, template, sigma)
        slopes, envelopes = edge_slopes(data, lr)
        (wn, we), ws = max(slopes.items(), key=lambda kv: kv[1])
        worst = {"direction": wn, "edge": we, "slope": ws}
        verdict = "PASS" if ws <= SLOPE_TOL else "FAIL"
    C = float(np.exp(np.max(lr[np.isfinite(lr)]))) if np.any(np.isfinite(lr)) else 0.0
    rows = []
    for name, env in envelopes.items():
        for g, e in zip(data.grids[name], env):
            rows.append({"coordinate": name, "value": float(g),
                         "max_log_ratio": float(e) if np.isfinite(e) else float("-inf")})
    summary = {
        "template": {**template.to_dict(), "C": C, "sigma": sigma},
        "sigma_sup": sup, "C": C, "sigma": sigma, "n_probes": int(len(lr)),
        "edge_slopes": {f"{k[0]}:{k[1]}": v for k, v in sorted(slopes.items())},
        "worst": worst, "slope_tolerance": SLOPE_TOL,
    }
    prov = {"path": data.path_description, "grid": data.spec,
            "error_bar_method": "none (exact kernel evaluation; edge-slope test on "
                                "log-ratio envelopes)"}
    return SweepReport("certify", ["coordinate", "value", "max_log_ratio"], rows, verdict,
                       summary, prov)


def certify_bound(kernel, template: BoundTemplate, probe_spec: ProbeSpec | None = None,
                  path=None, data: ProbeData | None = None, raise_on_fail=False):
    """Fit ``sigma`` and ``C`` for ``template`` and run the edge-slope test."""
    if data is None:
        if path is None:
            raise ValueError("a coefficient path or precomputed probe data is required")
        data = probe_kernel(kernel, path, template.alpha, template.beta, probe_spec)
    report = certify(data, template)
    if raise_on_fail and not report.passed:
        w = report.summary["worst"]
        raise UnboundedRatio(w["direction"], w["edge"], w["slope"])
    return report


def templates_upto(kernel, n, order, epsilon=0.1):
    out = []
    for g in multi_indices_upto(2 * n, order):
        out.append(standard_template(kernel, g[:n], g[n:], epsilon))
    return out
