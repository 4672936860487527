"""Mixed Lebesgue norms with power weights on sampled space-time fields.

Two nestings are supported for a field ``f(x, t)`` and weight ``w(x)``:

* time-outer  ``(int_t (int_x |w^mu f|^p dx)^{q/p} dt)^{1/q}``
* space-outer ``(int_x (int_t |w^mu f|^q dt)^{p/q} dx)^{1/p}``

Integrals are product trapezoid rules: the integrand is averaged over the
corners of each cell, and the weight is evaluated at the cell centre, so
``x_n^mu`` is never evaluated on the wall.  Every value comes with a
two-level Richardson estimate using the grid with every other node.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateDenominator, UnresolvedWeightSingularity

NESTINGS = ("time-outer", "space-outer")
WEIGHTS = ("xn", "distance", "none")


@dataclass(frozen=True)
class WeightedNormSpec:
    p: float = 2.0
    q: float = 2.0
    mu: float = 0.0
    nesting: str = "time-outer"
    weight: str = "xn"
    distance: object = field(default=None, compare=False, repr=False)
    strict: bool = True

    def __post_init__(self):
        for name in ("p", "q"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 1.0):
                raise ValueError(f"{name} must be finite and > 1, got {v}")
        if self.nesting not in NESTINGS:
            raise ValueError(f"nesting must be one of {NESTINGS}")
        if self.weight not in WEIGHTS:
            raise ValueError(f"weight must be one of {WEIGHTS}")
        if self.weight == "distance" and self.distance is None:
            raise ValueError("distance weight needs a distance evaluator")

    @property
    def admissible(self) -> bool:
        """Whether ``-1/p < mu < 1 - 1/p``."""
        return -1.0 / self.p < self.mu < 1.0 - 1.0 / self.p

    def with_nesting(self, nesting) -> "WeightedNormSpec":
        return replace(self, nesting=nesting)

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "mu": self.mu, "nesting": self.nesting,
                "weight": self.weight, "admissible": self.admissible}

    @classmethod
    def from_dict(cls, data, distance=None) -> "WeightedNormSpec":
        return cls(float(data.get("p", 2)), float(data.get("q", 2)), float(data.get("mu", 0)),
                   data.get("nesting", "time-outer"), data.get("weight", "xn"), distance)


@dataclass(frozen=True)
class NormValue:
    value: float
    error: float
    spec: dict

    @property
    def accepted(self) -> bool:
        return bool(np.isfinite(self.value) and self.error < 0.1 * self.value)


def _cell_average(a, axes_idx):
    for ax in axes_idx:
        n = a.shape[ax]
        if n < 2:
            continue
        lo = np.take(a, range(n - 1), axis=ax)
        hi = np.take(a, range(1, n), axis=ax)
        a = 0.5 * (lo + hi)
    return a


def _centres(axes):
    return [0.5 * (a[1:] + a[:-1]) if len(a) > 1 else a for a in axes]


def _widths(axes):
    return [np.diff(a) if len(a) > 1 else np.ones(1) for a in axes]


def _weight_power(spec, axes, cell_volume):
    """``w^{mu p}`` times cell volumes on the space cells."""
    n = len(axes)
    cen = _centres(axes)
    vol = np.ones([len(c) for c in cen])
    for i, w in enumerate(_widths(axes)):
        shape = [1] * n
        shape[i] = -1
        vol = vol * w.reshape(shape)
    if callable(cell_volume):
        vol = vol * cell_volume(np.stack(np.meshgrid(*cen, indexing="ij"), axis=-1))
    elif cell_volume is not None:
        vol = vol * cell_volume
    if spec.weight == "none" or spec.mu == 0.0:
        return vol
    if spec.weight == "xn":
        shape = [1] * n
        shape[-1] = -1
        w = cen[-1].reshape(shape)
    else:
        pts = np.stack(np.meshgrid(*cen, indexing="ij"), axis=-1)
        w = np.asarray(spec.distance(pts), dtype=float)
    with np.errstate(divide="ignore"):
        return vol * np.power(w, spec.mu * spec.p)


def _touches_wall(spec, axes):
    if spec.weight == "xn":
        return axes[-1][0] <= 0.0
    if spec.weight == "distance":
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return bool(np.min(spec.distance(pts)) <= 1e-14)
    return False


def _raw_norm(values, axes, times, spec, cell_volume):
    p, q = spec.p, spec.q
    n = len(axes)
    wp = _weight_power(spec, axes, cell_volume)
    dt = np.diff(times) if len(times) > 1 else np.ones(1)
    space_idx = list(range(n))
    a = np.abs(values)
    if spec.nesting == "time-outer":
        inner = _cell_average(a ** p, space_idx)  # (cells..., nt)
        per_t = np.tensordot(wp, inner, axes=(space_idx, space_idx))
        g = per_t ** (q / p)
        total = np.sum(_cell_average(g, [0]) * dt) if len(times) > 1 else g[0]
        return float(total ** (1.0 / q))
    inner = _cell_average(a ** q, [n])
    per_x = np.sum(inner * dt, axis=-1) if len(times) > 1 else inner[..., 0]
    g = _cell_average(per_x ** (p / q), space_idx)
    return float(np.sum(wp * g) ** (1.0 / p))


def _coarsen(axis):
    idx = list(range(0, len(axis), 2))
    if idx[-1] != len(axis) - 1:
        idx.append(len(axis) - 1)
    return np.array(idx)


def weighted_norm(field, spec: WeightedNormSpec, cell_volume=None) -> NormValue:
    """Norm of a :class:`SampledField` in the nesting named by ``spec``."""
    axes = list(field.axes)
    if spec.weight != "none" and spec.mu * spec.p <= -1.0 and _touches_wall(spec, axes):
        if spec.strict:
            raise UnresolvedWeightSingularity(
                f"mu*p = {spec.mu * spec.p:.3g} <= -1: the weight is not integrable up to "
                "the wall, so the norm diverges under refinement")
    with np.errstate(over="ignore", invalid="ignore"):
        fine = _raw_norm(field.values, axes, field.times, spec, cell_volume)
        err = 0.0
        sub = [_coarsen(a) for a in axes] + [_coarsen(field.times)]
        # an array of cell volumes only fits the fine grid; a callable fits both
        if all(len(i) >= 2 for i in sub) and (cell_volume is None or callable(cell_volume)):
            coarse_vals = field.values[np.ix_(*sub)]
            coarse = _raw_norm(coarse_vals, [a[i] for a, i in zip(axes, sub[:-1])],
                               field.times[sub[-1]], spec, cell_volume)
            err = abs(fine - coarse) / 3.0
    return NormValue(fine, float(err), spec.to_dict())


def norm_time_outer(field, spec: WeightedNormSpec, cell_volume=None) -> NormValue:
    return weighted_norm(field, spec.with_nesting("time-outer"), cell_volume)


def norm_space_outer(field, spec: WeightedNormSpec, cell_volume=None) -> NormValue:
    return weighted_norm(field, spec.with_nesting("space-outer"), cell_volume)


@dataclass(frozen=True)
class RatioValue:
    value: float
    error: float
    numerator: float
    denominator: float
    spec: dict


def coercive_ratio(second_derivs, u_t, f, spec: WeightedNormSpec, cell_volume=None):
    """``(|w^mu u_t| + sum_ij |w^mu D_i D_j u|) / |w^mu f|`` with propagated errors.

    ``second_derivs`` maps ``(i, j)`` (or any key) to fields; off-diagonal
    entries given once are counted twice, matching the full sum over ``i, j``.
    """
    den = weighted_norm(f, spec, cell_volume)
    if not den.value > 0.0 or den.value <= den.error:
        raise DegenerateDenominator("the weighted norm of the right-hand side vanishes")
    parts = [weighted_norm(u_t, spec, cell_volume)]
    mult = []
    items = second_derivs.items() if isinstance(second_derivs, dict) else enumerate(second_derivs)
    for key, fld in items:
        parts.append(weighted_norm(fld, spec, cell_volume))
        sym = isinstance(key, tuple) and len(key) == 2 and key[0] != key[1]
        mult.append(2.0 if sym else 1.0)
    weights = [1.0] + mult
    num = sum(w * v.value for w, v in zip(weights, parts))
    num_err = sum(w * v.error for w, v in zip(weights, parts))
    ratio = num / den.value
    err = ratio * (num_err / max(num, 1e-300) + den.error / den.value)
    return RatioValue(float(ratio), float(err), float(num), float(den.value), spec.to_dict())


def divergence_sentinel(mu, p, levels=6, h0=0.25, q=None):
    """Refinement test of ``|x_n^mu 1|`` on ``(0, 1)``: True if the sequence is not Cauchy.

    The wall cell is halved at every level; for an integrable weight the
    increments shrink geometrically, otherwise they stay of size one.
    """
    from .fields import SampledField, graded_axis
    spec = WeightedNormSpec(p, q or p, mu, "time-outer", "xn", strict=False)
    vals = []
    for k in range(levels):
        ax = graded_axis(1.0, h0 * 0.5 ** k, 0.05, factor=0.5)
        fld = SampledField((ax,), np.array([0.0, 1.0]), np.ones((len(ax), 2)))
        vals.append(weighted_norm(fld, spec).value ** p)
    inc = np.abs(np.diff(vals))
    if not np.all(np.isfinite(vals)) or inc[-1] == 0.0:
        return not np.all(np.isfinite(vals))
    ratio = inc[-1] / inc[-2]
    return bool(ratio > 0.98)
