"""PNG figures and two-column data files written next to reports."""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .reports import atomic_write

# no timestamps or version strings in the files, so reruns are byte-identical
_META = {"Software": None}


def _figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=110, metadata=_META)
    _figure().close(fig)
    return atomic_write(path, buf.getvalue())


def write_columns(path, x, y, header):
    lines = [f"# {header}"] + [f"{float(a)!r} {float(b)!r}" for a, b in zip(x, y)]
    return atomic_write(path, "\n".join(lines) + "\n")


def plot_certification(report, stem):
    """Envelope of the log-ratio against every probe coordinate."""
    plt = _figure()
    stem = Path(stem)
    coords = sorted({r["coordinate"] for r in report.rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    written = []
    for c in coords:
        rows = [r for r in report.rows if r["coordinate"] == c and float(r["value"]) > 0]
        x = np.array([float(r["value"]) for r in rows])
        y = np.array([float(r["max_log_ratio"]) for r in rows])
        ok = np.isfinite(y)
        ax.semilogx(x[ok], y[ok], "o-", label=c)
        written.append(write_columns(stem.with_name(f"{stem.name}_{c}.dat"), x[ok], y[ok],
                                     f"{c} max_log_ratio"))
    t = report.summary.get("template", {})
    ax.set_title(f"{t.get('kernel', '')} alpha={t.get('alpha')} beta={t.get('beta')}: "
                 f"{report.verdict}")
    ax.set_xlabel("probe coordinate")
    ax.set_ylabel("max log ratio")
    ax.legend()
    written.append(_save(fig, stem.with_suffix(".png")))
    return written


def plot_sweep(report, stem):
    """Coercive ratio against the weight exponent, one curve per (p, q, nesting)."""
    plt = _figure()
    stem = Path(stem)
    col = "ratio_fine" if "ratio_fine" in report.columns else "ratio_coarse"
    err = col.replace("ratio", "error")
    groups = {}
    for r in report.rows:
        groups.setdefault((r["p"], r["q"], r["nesting"]), []).append(r)
    fig, ax = plt.subplots(figsize=(6, 4))
    written = []
    for (p, q, nest), rows in sorted(groups.items()):
        mu = np.array([float(r["mu"]) for r in rows])
        val = np.array([float(r[col]) for r in rows])
        e = np.array([float(r[err]) for r in rows])
        ax.errorbar(mu, val, yerr=e, marker="o", capsize=3, label=f"p={p} q={q} {nest}")
        written.append(write_columns(stem.with_name(f"{stem.name}_p{p}_q{q}_{nest}.dat"),
                                     mu, val, f"mu {col}"))
    ax.set_xlabel("mu")
    ax.set_ylabel("max coercive ratio")
    ax.set_title(f"coercive sweep: {report.verdict}")
    ax.legend(fontsize=7)
    written.append(_save(fig, stem.with_suffix(".png")))
    return written


def plot_trend(report, stem):
    plt = _figure()
    stem = Path(stem)
    d = np.array([float(r["delta"]) for r in report.rows])
    v = np.array([float(r["ratio"]) for r in report.rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(1.0 / d, v, "o-")
    ax.set_xlabel("1 / delta")
    ax.set_ylabel("coercive ratio")
    ax.set_title(f"mu={report.summary.get('mu')}: slope {report.summary.get('loglog_slope'):.3g}")
    written = [write_columns(stem.with_name(f"{stem.name}.dat"), 1.0 / d, v, "inv_delta ratio")]
    written.append(_save(fig, stem.with_suffix(".png")))
    return written


def plot_field(field, stem, chart=None, time_index=-1):
    """Snapshot of a 1-D or 2-D field at one time (physical coordinates if a chart is given)."""
    plt = _figure()
    stem = Path(stem)
    v = field.values[..., time_index]
    fig, ax = plt.subplots(figsize=(6, 4))
    if field.dim == 1:
        ax.plot(field.axes[0], v)
        write_columns(stem.with_name(f"{stem.name}.dat"), field.axes[0], v, "x u")
    elif field.dim == 2:
        xi = field.points()
        xy = chart.to_physical(xi) if chart is not None else xi
        m = ax.pcolormesh(xy[..., 0], xy[..., 1], v, shading="gouraud")
        fig.colorbar(m, ax=ax)
        ax.set_aspect("equal")
    else:
        mid = tuple(len(a) // 2 for a in field.axes[:-2])
        ax.pcolormesh(field.axes[-2], field.axes[-1], v[mid].T, shading="gouraud")
    ax.set_title(f"{field.tag} at t = {field.times[time_index]:.4g}")
    return [_save(fig, stem.with_suffix(".png"))]
