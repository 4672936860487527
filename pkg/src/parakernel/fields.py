"""Space-time fields sampled on tensor grids, and their on-disk format.

A field on ``n`` space axes and one time axis is stored as an array of shape
``(len(x_1), ..., len(x_n), len(t))``.  On disk the values go to a flat
little-endian float64 file (or a CSV) and the grid geometry to a JSON
sidecar ``<file>.json``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

TAGS = ("u", "u_t", "D2u", "Du", "f", "other")


@dataclass(frozen=True, eq=False)
class SampledField:
    axes: tuple
    times: np.ndarray
    values: np.ndarray
    tag: str = "other"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "times", times)
        expected = tuple(len(a) for a in axes) + (len(times),)
        if values.shape != expected:
            raise ValueError(f"values shape {values.shape} does not match grid {expected}")
        for a in axes + (times,):
            if len(a) > 1 and np.any(np.diff(a) <= 0):
                raise ValueError("grid spacings must be positive")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def box(self):
        return np.array([[a[0], a[-1]] for a in self.axes])

    def points(self) -> np.ndarray:
        """Space nodes as an array of shape ``(*space_shape, n)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def with_values(self, values, tag=None) -> "SampledField":
        return SampledField(self.axes, self.times, values, tag or self.tag, dict(self.meta))

    def geometry(self) -> dict:
        return {
            "axes": [a.tolist() for a in self.axes],
            "times": self.times.tolist(),
            "shape": list(self.values.shape),
            "tag": self.tag,
            "dtype": "<f8",
            "order": "C",
            "meta": self.meta,
        }

    def save(self, path, fmt=None) -> Path:
        path = Path(path)
        fmt = fmt or ("csv" if path.suffix == ".csv" else "bin")
        if fmt == "csv":
            np.savetxt(path, self.values.reshape(-1, 1), delimiter=",", fmt="%.17g")
        else:
            path.write_bytes(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        sidecar = path.with_name(path.name + ".json")
        sidecar.write_text(json.dumps(self.geometry(), indent=1, sort_keys=True))
        return path

    @classmethod
    def load(cls, path) -> "SampledField":
        path = Path(path)
        geo = json.loads(path.with_name(path.name + ".json").read_text())
        shape = tuple(geo["shape"])
        if path.suffix == ".csv":
            values = np.loadtxt(path, delimiter=",").reshape(shape)
        else:
            values = np.frombuffer(path.read_bytes(), dtype="<f8").reshape(shape)
        return cls(tuple(geo["axes"]), geo["times"], values.copy(), geo.get("tag", "other"),
                   geo.get("meta", {}))

    def interpolator(self, method="cubic"):
        """Callable ``f(y, s)`` vanishing outside the sampled box and window."""
        grid = self.axes + (self.times,)
        if any(len(a) < 4 for a in grid):
            method = "linear"
        interp = RegularGridInterpolator(grid, self.values, method=method,
                                         bounds_error=False, fill_value=0.0)

        def source(y, s):
            y = np.asarray(y, dtype=float)
            s = np.broadcast_to(np.asarray(s, dtype=float), y.shape[:-1])
            pts = np.concatenate([y, s[..., None]], axis=-1)
            return interp(pts.reshape(-1, pts.shape[-1])).reshape(y.shape[:-1])

        return source


def graded_axis(length, h_wall, h_max, factor=0.8, wall="low"):
    """Nodes on ``[0, length]`` with cells shrinking by ``factor`` toward the wall.

    Cells grow geometrically from ``h_wall`` by ``1/factor`` until they reach
    ``h_max``; the rest of the interval is uniform.  ``wall`` may be ``"low"``,
    ``"high"`` or ``"both"``.
    """
    if wall == "both":
        half = graded_axis(length / 2, h_wall, h_max, factor, "low")
        return np.concatenate([half, length - half[-2::-1]])
    widths = []
    h = h_wall
    total = 0.0
    while h < h_max and total + h < length:
        widths.append(h)
        total += h
        h /= factor
    rest = length - total
    m = max(int(np.ceil(rest / h_max)), 1)
    widths.extend([rest / m] * m)
    nodes = np.concatenate([[0.0], np.cumsum(widths)])
    nodes[-1] = length
    if wall == "high":
        nodes = length - nodes[::-1]
    return nodes


def refine_axis(nodes):
    """Insert midpoints: every cell split in two."""
    nodes = np.asarray(nodes, dtype=float)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    out = np.empty(2 * len(nodes) - 1)
    out[0::2] = nodes
    out[1::2] = mid
    return out
