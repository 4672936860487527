"""Coercive-ratio sweeps over weight exponents, and report comparison.

Solutions come from the Gaussian-packet route (:mod:`parakernel.packets`):
fields are exact at grid nodes up to a one-dimensional time quadrature, so
grid refinement only changes the norm quadrature.  Half-space sweeps use
even (mirrored) sources, which gives ``D_n u = 0`` on the wall for paths
without normal cross terms.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import partial

import numpy as np

from .errors import AxisMismatch, ModeUnavailable, ParakernelError
from .fields import graded_axis, refine_axis
from .norms import WeightedNormSpec, coercive_ratio
from .packets import Packet, PacketSource, packet_solution
from .reports import SweepReport, ordered_map

SCALES = {"Lpq": ("time-outer",), "tilde": ("space-outer",),
          "both": ("time-outer", "space-outer")}
STABILITY = 0.2
RATIO_CAP = 100.0


@dataclass(frozen=True)
class SweepGrid:
    """Tensor grid: uniform tangential axes, wall-graded normal axis, uniform time."""

    half_width: float = 4.0
    height: float = 4.0
    h_tangential: float = 0.1
    h_wall: float = 0.01
    h_max: float = 0.1
    factor: float = 0.8
    t_final: float = 1.0
    n_times: int = 21
    halfspace: bool = True

    def axes(self, n, level=0):
        m = int(round(2 * self.half_width / self.h_tangential))
        tang = np.linspace(-self.half_width, self.half_width, m + 1)
        if self.halfspace:
            normal = graded_axis(self.height, self.h_wall, self.h_max, self.factor)
        else:
            normal = tang
        axes = [tang] * (n - 1) + [normal]
        times = np.linspace(0.0, self.t_final, self.n_times)
        for _ in range(level):
            axes = [refine_axis(a) for a in axes]
            times = refine_axis(times)
        return axes, times

    def to_dict(self):
        return asdict(self)


def default_family(n=2, seed=0, size=12, halfspace=True, t_final=1.0):
    """Seeded test family: interior bumps, wall-hugging bumps, wave packets, pairs."""
    rng = np.random.default_rng(seed)
    out = []

    def window():
        s0 = rng.uniform(0.0, 0.3) * t_final
        return (s0, s0 + rng.uniform(0.3, 0.6) * t_final)

    def bump(xn, width, k=None):
        c = np.concatenate([rng.uniform(-0.5, 0.5, n - 1), [xn]])
        w = np.diag(np.full(n, width ** 2))
        return Packet(tuple(c), tuple(w.ravel()), window(), float(rng.choice([-1.0, 1.0])),
                      None if k is None else tuple(k), float(rng.uniform(0, np.pi)))

    kinds = ["interior"] * 4 + ["wall"] * 3 + ["wave"] * 3 + ["pair"] * 2
    for i in range(size):
        kind = kinds[i % len(kinds)]
        if kind == "interior":
            pk = [bump(rng.uniform(0.3, 1.0), rng.uniform(0.1, 0.3))]
        elif kind == "wall":
            pk = [bump(rng.uniform(0.0, 0.05), rng.uniform(0.05, 0.15))]
        elif kind == "wave":
            k = rng.normal(size=n)
            k *= rng.uniform(2.0, 6.0) / np.linalg.norm(k)
            pk = [bump(rng.uniform(0.1, 0.6), rng.uniform(0.3, 0.5), k)]
        else:
            pk = [bump(rng.uniform(0.0, 0.8), rng.uniform(0.1, 0.3)) for _ in range(2)]
        if not halfspace:
            pk = [Packet(p.center[:-1] + (rng.uniform(-0.5, 0.5),), p.cov, p.window, p.amp,
                         p.wavevector, p.phase) for p in pk]
        out.append(PacketSource(pk, neumann=halfspace, label=f"{kind}-{i}"))
    return out


def wall_family(n=2, delta=0.1, tangential_width=0.3, window=(0.0, 0.5)):
    """Single bump at distance ``delta`` from the wall with normal width ``delta / 2``."""
    c = (0.0,) * (n - 1) + (delta,)
    w = np.diag([tangential_width ** 2] * (n - 1) + [(0.5 * delta) ** 2])
    return PacketSource([Packet(c, tuple(w.ravel()), window)], neumann=True,
                        label=f"wall-delta={delta:g}")


def _fields(path, source, axes, times):
    res = packet_solution(path, source, axes, times, ("D2u", "u_t"))
    n = path.dim
    d2 = {(i, j): res[f"D2u_{i + 1}{j + 1}"] for i in range(n) for j in range(i, n)}
    return d2, res["u_t"], res["f"]


def _check_path(path, halfspace):
    if halfspace and not path.is_reflection_symmetric():
        raise ModeUnavailable("half-space sweeps need a path without normal cross terms")


def _ratios(bundle, specs):
    d2, ut, f = bundle
    out = {}
    for key, spec in specs.items():
        try:
            out[key] = coercive_ratio(d2, ut, f, spec)
        except ParakernelError as exc:
            out[key] = exc
    return out


def coercive_sweep(path, scale="both", p=2.0, q=2.0, mu_grid=(0.0,), family=None,
                   grid: SweepGrid | None = None, refine=True, seed=0, weight="xn",
                   pq_list=None, workers=None):
    """Max coercive ratio over ``family`` for every ``(p, q, mu, nesting)``.

    With ``refine`` the fields are recomputed on the grid with every cell
    halved and the relative change of the family maximum is reported.
    """
    grid = grid or SweepGrid()
    halfspace = grid.halfspace
    _check_path(path, halfspace)
    n = path.dim
    family = family if family is not None else default_family(n, seed, halfspace=halfspace,
                                                              t_final=grid.t_final)
    pq_list = pq_list or [(p, q)]
    nestings = SCALES[scale]
    wkind = weight if halfspace else "none"
    specs = {}
    for pp, qq in pq_list:
        for mu in mu_grid:
            for nest in nestings:
                specs[(pp, qq, mu, nest)] = WeightedNormSpec(pp, qq, mu, nest, wkind)
    levels = [0, 1] if refine else [0]
    results = {lvl: [] for lvl in levels}
    for lvl in levels:
        axes, times = grid.axes(n, lvl)
        results[lvl] = ordered_map(partial(_member_ratios, path, axes, times, specs), family,
                                   workers)
    rows = []
    flags = []
    in_range_ok = True
    for key, spec in specs.items():
        pp, qq, mu, nest = key
        row = {"p": pp, "q": qq, "mu": mu, "nesting": nest, "admissible": spec.admissible}
        for lvl, name in zip(levels, ("coarse", "fine")):
            vals = [r[key] for r in results[lvl]]
            good = [(v.value, v.error, i) for i, v in enumerate(vals) if not isinstance(v, Exception)]
            failures = len(vals) - len(good)
            if good:
                best = max(good)
                row[f"ratio_{name}"], row[f"error_{name}"], row[f"argmax_{name}"] = best
            else:
                row[f"ratio_{name}"], row[f"error_{name}"], row[f"argmax_{name}"] = (
                    float("nan"), float("nan"), -1)
            row[f"failures_{name}"] = failures
        if refine:
            a, b = row["ratio_coarse"], row["ratio_fine"]
            row["refine_change"] = abs(b - a) / b if b > 0 else float("inf")
        else:
            row["refine_change"] = 0.0
        final = row["ratio_fine" if refine else "ratio_coarse"]
        row["bounded"] = bool(np.isfinite(final) and final <= RATIO_CAP
                              and row["refine_change"] < STABILITY)
        if spec.admissible and not row["bounded"]:
            in_range_ok = False
            flags.append(f"unbounded or unstable at p={pp}, q={qq}, mu={mu}, {nest}")
        rows.append(row)
    cols = ["p", "q", "mu", "nesting", "admissible", "ratio_coarse", "error_coarse",
            "argmax_coarse", "failures_coarse"]
    if refine:
        cols += ["ratio_fine", "error_fine", "argmax_fine", "failures_fine"]
    cols += ["refine_change", "bounded"]
    prov = {"path": path.describe(), "grid": grid.to_dict(), "seed": seed,
            "family": [m.label for m in family],
            "config": {"scale": scale, "pq": [list(x) for x in pq_list],
                       "mu_grid": list(mu_grid), "seed": seed, "grid": grid.to_dict(),
                       "weight": wkind},
            "error_bar_method": "Richardson two-level norm quadrature (every other node), "
                                "propagated to ratios; refinement change on halved cells"}
    summary = {"stability_threshold": STABILITY, "ratio_cap": RATIO_CAP,
               "family_size": len(family)}
    return SweepReport("coercive-sweep", cols, rows, "PASS" if in_range_ok else "FAIL",
                       summary, prov, flags)


def wall_trend(path, p=2.0, q=2.0, mu=None, deltas=None, nesting="time-outer",
               grid: SweepGrid | None = None, tangential_width=0.3):
    """Coercive ratio of the wall-concentrating bump as its distance halves.

    Reports the log-log slope of ratio against ``1/delta`` and whether the
    sequence increases monotonically.
    """
    n = path.dim
    _check_path(path, True)
    mu = 1.0 - 1.0 / p + 0.2 if mu is None else mu
    deltas = deltas if deltas is not None else [0.1 * 0.5 ** k for k in range(4)]
    base = grid or SweepGrid(t_final=0.5, n_times=11, half_width=2.0, height=2.5,
                             h_tangential=0.1, h_max=0.1)
    spec = WeightedNormSpec(p, q, mu, nesting, "xn")
    rows = []
    for d in deltas:
        g = SweepGrid(**{**base.to_dict(), "h_wall": min(base.h_wall, d / 16.0)})
        axes, times = g.axes(n)
        src = wall_family(n, d, tangential_width, (0.0, g.t_final))
        r = _one_ratio(path, src, axes, times, spec)
        rows.append({"delta": d, "ratio": r.value, "error": r.error, "mu": mu,
                     "admissible": spec.admissible})
    lr = np.log([r["ratio"] for r in rows])
    ld = np.log(1.0 / np.asarray(deltas))
    slope = float(np.polyfit(ld, lr, 1)[0]) if len(rows) > 1 else 0.0
    monotone = bool(np.all(np.diff(lr) > 0))
    change = float(np.max(np.abs(np.diff(np.exp(lr))) / np.exp(lr[1:]))) if len(rows) > 1 else 0.0
    summary = {"loglog_slope": slope, "monotone_increasing": monotone,
               "max_relative_change": change, "mu": mu, "p": p, "q": q, "nesting": nesting}
    grows = monotone and slope > 0.1
    verdict = "GROWS" if grows else "FLAT"
    prov = {"path": path.describe(), "grid": base.to_dict(),
            "config": {"p": p, "q": q, "mu": mu, "deltas": list(deltas), "nesting": nesting,
                       "grid": base.to_dict(), "tangential_width": tangential_width},
            "error_bar_method": "Richardson two-level norm quadrature, propagated to ratios"}
    return SweepReport("wall-trend", ["delta", "ratio", "error", "mu", "admissible"], rows,
                       verdict, summary, prov)


def _member_ratios(path, axes, times, specs, member):
    return _ratios(_fields(path, member, axes, times), specs)


def _one_ratio(path, src, axes, times, spec):
    d2, ut, f = _fields(path, src, axes, times)
    return coercive_ratio(d2, ut, f, spec)


@dataclass
class Comparison:
    rows: list
    drifted: int
    max_relative: float

    @property
    def drift(self) -> bool:
        return self.drifted > 0


def mollify_and_compare(report_a: SweepReport, report_b: SweepReport, value=None,
                        error=None, keys=None, floor=1e-9):
    """Per-row relative differences; a row drifts when the gap exceeds twice the
    combined error bars (plus a relative rounding floor)."""
    if report_a.columns != report_b.columns or len(report_a.rows) != len(report_b.rows):
        raise AxisMismatch("reports have different columns or row counts")
    value = value or _default_value(report_a)
    keys = keys or [c for c in report_a.columns if c not in _numeric_outputs(report_a)]
    rows = []
    drifted = 0
    max_rel = 0.0
    for ra, rb in zip(report_a.rows, report_b.rows):
        if any(ra.get(k) != rb.get(k) for k in keys):
            raise AxisMismatch(f"axis values differ: {[ra.get(k) for k in keys]} vs "
                               f"{[rb.get(k) for k in keys]}")
        a, b = float(ra[value]), float(rb[value])
        ea = float(ra.get(error, 0.0)) if error else 0.0
        eb = float(rb.get(error, 0.0)) if error else 0.0
        if not (np.isfinite(a) and np.isfinite(b)):
            same = a == b
            rel = 0.0 if same else float("inf")
            d = not same
        else:
            gap = abs(a - b)
            rel = gap / max(abs(a), abs(b), 1e-300)
            d = gap > 2.0 * (ea + eb) + floor * max(abs(a), abs(b))
        drifted += int(d)
        max_rel = max(max_rel, rel)
        rows.append({**{k: ra.get(k) for k in keys}, "a": a, "b": b, "relative": rel,
                     "drift": d})
    return Comparison(rows, drifted, max_rel)


def _default_value(report):
    for c in ("ratio_fine", "ratio_coarse", "ratio", "max_log_ratio"):
        if c in report.columns:
            return c
    raise AxisMismatch("no value column to compare")


def _numeric_outputs(report):
    return {c for c in report.columns if c.startswith(("ratio", "error", "argmax", "failures",
                                                        "refine", "bounded", "max_log"))}
