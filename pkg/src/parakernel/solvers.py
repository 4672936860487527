"""Solution operator of the whole-space problem by direct quadrature."""
from __future__ import annotations

import numpy as np

from .fields import SampledField
from .quadrature import convolve


def hessian_pairs(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def output_terms(n, outputs):
    """Derivative dictionaries in the ``x``-variable for the requested outputs."""
    names, terms = [], []
    zero = (0,) * n

    def unit(*idx):
        g = [0] * n
        for i in idx:
            g[i] += 1
        return tuple(g)

    for out in outputs:
        if out == "u":
            names.append("u")
            terms.append({zero: 1.0})
        elif out == "Du":
            for i in range(n):
                names.append(f"Du_{i + 1}")
                terms.append({unit(i): 1.0})
        elif out in ("D2u", "u_t"):
            for i, j in hessian_pairs(n):
                name = f"D2u_{i + 1}{j + 1}"
                if name not in names:
                    names.append(name)
                    terms.append({unit(i, j): 1.0})
        else:
            raise ValueError(f"unknown output {out!r}")
    return names, terms


def resolve_source(f, support=None):
    """Return ``(callable, box, (s0, s1))`` for a field or a callable source."""
    if isinstance(f, SampledField):
        box = f.box if support is None else np.asarray(support[0], dtype=float)
        window = (f.times[0], f.times[-1]) if support is None else tuple(support[1])
        return f.interpolator(), box, window
    if support is None:
        raise ValueError("a callable source needs support=(box, (s0, s1))")
    return f, np.asarray(support[0], dtype=float), tuple(support[1])


def _grid_points(eval_grid):
    axes, times = eval_grid
    axes = [np.asarray(a, dtype=float) for a in axes]
    times = np.asarray(times, dtype=float)
    mesh = np.meshgrid(*axes, times, indexing="ij")
    pts = np.stack(mesh[:-1], axis=-1).reshape(-1, len(axes))
    return axes, times, pts, mesh[-1].ravel()


def assemble_outputs(path, source, names, values, errors, eval_grid, outputs, tag_meta):
    axes, times, pts, tt = _grid_points(eval_grid)
    shape = tuple(len(a) for a in axes) + (len(times),)
    n = path.dim
    result = {}
    for name, v, e in zip(names, values, errors):
        result[name] = SampledField(axes, times, v.reshape(shape), _tag(name),
                                    {"quad_error": float(np.max(e, initial=0.0)), **tag_meta})
    if "u_t" in outputs:
        A = path.evaluate(tt)
        ut = source(pts, tt).astype(float)
        err = 0.0
        for i, j in hessian_pairs(n):
            k = names.index(f"D2u_{i + 1}{j + 1}")
            mult = 1.0 if i == j else 2.0
            ut = ut + mult * A[:, i, j] * values[k]
            err = err + mult * np.abs(A[:, i, j]) * errors[k]
        result["u_t"] = SampledField(axes, times, ut.reshape(shape), "u_t",
                                     {"quad_error": float(np.max(err, initial=0.0)), **tag_meta})
    return result


def _tag(name):
    if name.startswith("D2u"):
        return "D2u"
    if name.startswith("Du"):
        return "Du"
    return name


def solve_whole_space(path, f, eval_grid, outputs=("u",), support=None, m_t=24, m_s=8,
                      tol=None, resolution=None):
    """``u(x,t) = int int Gamma(x,y;t,s) f(y,s) dy ds`` and its derivatives.

    ``eval_grid`` is ``(axes, times)``; the result maps output names
    (``u``, ``Du_i``, ``D2u_ij``, ``u_t``) to :class:`SampledField` objects,
    each carrying its quadrature error estimate in ``meta["quad_error"]``.
    """
    source, box, window = resolve_source(f, support)
    _, _, pts, tt = _grid_points(eval_grid)
    names, terms = output_terms(path.dim, outputs)
    res = convolve(path, source, pts, tt, terms, box, window, m_t=m_t, m_s=m_s, tol=tol,
                   resolution=resolution)
    return assemble_outputs(path, source, names, res.values, res.error, eval_grid, outputs,
                            {"route": "whole-space quadrature"})
