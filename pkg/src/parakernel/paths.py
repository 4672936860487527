"""Piecewise-constant, measurable-in-time coefficient matrices.

A :class:`CoefficientPath` stores symmetric matrices ``A_0, ..., A_{m-1}`` on
the intervals ``[tau_k, tau_{k+1})``.  The first matrix is extended to
``(-inf, tau_1)`` and the last to ``[tau_{m-1}, inf)``, and values are
right-continuous at breakpoints.  Only running integrals of ``A`` enter the
Green functions, and those are computed as exact sums of overlap lengths.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (EllipticityViolated, EmptySpan, InvalidPath,
                     NonMonotoneBreakpoints, NonSymmetric)

_EIG_SLACK = 1e-12


@dataclass(frozen=True)
class AccumulatedMatrix:
    """``B = int_s^t A(tau) dtau`` together with its span."""

    B: np.ndarray
    span: tuple

    @property
    def length(self) -> float:
        return self.span[1] - self.span[0]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.B)


@dataclass(frozen=True, eq=False)
class CoefficientPath:
    breakpoints: np.ndarray
    matrices: np.ndarray
    nu: float
    dim: int
    _lo: np.ndarray = field(init=False, repr=False)
    _hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = self.breakpoints
        lo = np.concatenate(([-np.inf], bp[1:-1]))
        hi = np.concatenate((bp[1:-1], [np.inf]))
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def n_intervals(self) -> int:
        return len(self.matrices)

    @property
    def interior_breakpoints(self) -> np.ndarray:
        """Times where the coefficient can actually jump."""
        return self.breakpoints[1:-1]

    def evaluate(self, t):
        """Matrix in force at time ``t`` (vectorised over ``t``)."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breakpoints[1:-1], t, side="right")
        return self.matrices[k]

    def integrate(self, s, t) -> AccumulatedMatrix:
        if not t > s:
            raise EmptySpan(f"need t > s, got s={s}, t={t}")
        return AccumulatedMatrix(self.integrate_many(s, t), (float(s), float(t)))

    def integrate_many(self, s, t) -> np.ndarray:
        """``int_s^t A`` for broadcastable arrays ``s`` and ``t``; shape (..., n, n).

        No validation of ``t > s``: empty spans give the zero matrix.
        """
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        s, t = np.broadcast_arrays(s, t)
        a = np.maximum(s[..., None], self._lo)
        b = np.minimum(t[..., None], self._hi)
        overlap = np.clip(b - a, 0.0, None)
        return np.einsum("...k,kij->...ij", overlap, self.matrices)

    def is_reflection_symmetric(self) -> bool:
        n = self.dim
        if n == 1:
            return True
        # rounding residue from congruences (e.g. an oblique shear) counts as zero
        cross = np.abs(self.matrices[:, n - 1, : n - 1])
        scale = np.abs(self.matrices).max(axis=(1, 2))[:, None]
        return bool(np.all(cross <= 8 * np.finfo(float).eps * scale))

    def normal_shear(self):
        """Vector ``b = A'_n / a_nn`` if it is the same on every interval, else None.

        When it exists, the oblique reflection ``y -> (y' - 2 y_n b, -y_n)``
        leaves every ``A(t)`` invariant.
        """
        n = self.dim
        if n == 1:
            return np.zeros(0)
        b = self.matrices[:, : n - 1, n - 1] / self.matrices[:, n - 1, n - 1][:, None]
        if np.allclose(b, b[0], rtol=1e-13, atol=1e-15):
            return b[0].copy()
        return None

    def congruence(self, T) -> "CoefficientPath":
        """Path of ``T A(t) T^T`` (change of spatial variables ``z = T x``)."""
        T = np.asarray(T, dtype=float)
        mats = np.einsum("ij,kjl,ml->kim", T, self.matrices, T)
        mats = 0.5 * (mats + np.swapaxes(mats, 1, 2))
        return make_path(self.breakpoints, mats, ellipticity_of(mats), self.dim)

    def restrict(self, k: int) -> "CoefficientPath":
        """Leading ``k x k`` block, e.g. the tangential operator in ``R^{n-1}``."""
        mats = self.matrices[:, :k, :k]
        return make_path(self.breakpoints, mats, ellipticity_of(mats), k)

    def scaled(self, factor: float) -> "CoefficientPath":
        mats = self.matrices * factor
        return make_path(self.breakpoints, mats, ellipticity_of(mats), self.dim)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "nu": self.nu,
            "breakpoints": [float(b) for b in self.breakpoints],
            "matrices": [[float(v) for v in m.ravel()] for m in self.matrices],
        }

    def describe(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def ellipticity_of(matrices) -> float:
    """Largest ``nu`` for which the matrices satisfy the ellipticity sandwich."""
    eig = np.linalg.eigvalsh(np.asarray(matrices, dtype=float))
    return float(min(eig.min(), 1.0 / eig.max(), 1.0))


def make_path(breakpoints, matrices, nu, dim) -> CoefficientPath:
    bp = np.array(breakpoints, dtype=float)
    mats = np.array(matrices, dtype=float)
    if mats.ndim == 2:
        mats = mats.reshape(len(mats), dim, dim)
    if bp.ndim != 1 or len(bp) < 2:
        raise InvalidPath("need at least two breakpoints")
    if mats.shape != (len(bp) - 1, dim, dim):
        raise InvalidPath(
            f"expected {len(bp) - 1} matrices of shape ({dim}, {dim}), got {mats.shape}")
    if dim < 1:
        raise InvalidPath("dim must be >= 1")
    if not 0.0 < nu <= 1.0:
        raise InvalidPath(f"nu must lie in (0, 1], got {nu}")
    if np.any(np.diff(bp) <= 0) or not np.all(np.isfinite(bp)):
        raise NonMonotoneBreakpoints(f"breakpoints not strictly increasing: {bp}")
    for k, m in enumerate(mats):
        if np.any(m != m.T):
            raise NonSymmetric(f"interval {k}: matrix is not symmetric")
        eig = np.linalg.eigvalsh(m)
        for e in (eig[0], eig[-1]):
            if e < nu * (1 - _EIG_SLACK) or e > (1.0 / nu) * (1 + _EIG_SLACK):
                raise EllipticityViolated(k, float(e), nu)
    bp.setflags(write=False)
    mats.setflags(write=False)
    return CoefficientPath(bp, mats, float(nu), int(dim))


def constant_path(A, nu=None, span=(0.0, 1.0)) -> CoefficientPath:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if nu is None:
        nu = ellipticity_of(A[None])
    return make_path(list(span), [A], nu, A.shape[0])


def load_path(source) -> CoefficientPath:
    """Load a path from a JSON file, a JSON string or an already-parsed dict."""
    if isinstance(source, dict):
        data = source
    else:
        text = str(source)
        p = Path(text)
        if not text.lstrip().startswith("{") and p.exists():
            text = p.read_text()
        data = json.loads(text)
    try:
        dim = int(data["dim"])
        mats = [np.asarray(m, dtype=float).reshape(dim, dim) for m in data["matrices"]]
        return make_path(data["breakpoints"], mats, float(data["nu"]), dim)
    except KeyError as exc:
        raise InvalidPath(f"missing field {exc}") from None
    except ValueError as exc:
        if isinstance(exc, InvalidPath):
            raise
        raise InvalidPath(str(exc)) from None


def random_path(rng, dim, nu, n_intervals=3, span=(0.0, 1.0), diagonal=False,
                symmetric=False) -> CoefficientPath:
    """Random valid path; eigenvalues drawn log-uniformly in ``[nu, 1/nu]``.

    ``symmetric`` forces the reflection-symmetric block structure.
    """
    bp = np.sort(rng.uniform(*span, size=n_intervals - 1))
    bp = np.concatenate(([span[0]], bp, [span[1]]))
    mats = []
    for _ in range(n_intervals):
        eig = np.exp(rng.uniform(np.log(nu), -np.log(nu), size=dim))
        if diagonal:
            Q = np.eye(dim)
        elif symmetric and dim > 1:
            Q = np.eye(dim)
            q, _ = np.linalg.qr(rng.standard_normal((dim - 1, dim - 1)))
            Q[: dim - 1, : dim - 1] = q
        else:
            Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        m = (Q * eig) @ Q.T
        m = 0.5 * (m + m.T)
        if (diagonal or symmetric) and dim > 1:
            m[dim - 1, : dim - 1] = 0.0
            m[: dim - 1, dim - 1] = 0.0
        mats.append(m)
    return make_path(bp, mats, nu * (1 - 1e-9), dim)
