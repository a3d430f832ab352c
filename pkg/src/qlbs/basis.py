"""Clamped B-spline basis used as features by both solvers.

The basis is built once over the global range of the chosen state
variable across all paths and time steps; sharing one knot vector keeps
the regression coefficients comparable across time. Evaluation clamps
out-of-domain points to the domain edge, so feature rows always form a
partition of unity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_N_BASIS = 12
DEFAULT_ORDER = 4

# Relative padding applied to the data range before placing knots.
_DOMAIN_PAD = 1e-6


@dataclass(frozen=True)
class BasisSpec:
    """A clamped knot vector for ``n_basis`` splines of a given order.

    ``order`` counts coefficients per polynomial piece (order = degree + 1,
    so order 1 is piecewise constant and order 4 cubic). The knot vector
    has length ``n_basis + order`` with the first and last knot repeated
    ``order`` times.
    """

    knots: np.ndarray
    n_basis: int
    order: int

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if self.n_basis < self.order:
            raise ValueError("n_basis must be at least the spline order")
        if knots.size != self.n_basis + self.order:
            raise ValueError("knot vector must have n_basis + order entries")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")

    @property
    def degree(self) -> int:
        return self.order - 1

    @property
    def lo(self) -> float:
        return float(self.knots[self.order - 1])

    @property
    def hi(self) -> float:
        return float(self.knots[self.n_basis])


@dataclass(frozen=True)
class FeatureMatrix:
    """Basis values for the paths at one time step, shape (K, n_basis)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature matrix must be finite")

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_basis(self) -> int:
        return self.values.shape[1]


def make_spec(data_lo: float, data_hi: float, n_basis: int = DEFAULT_N_BASIS,
              order: int = DEFAULT_ORDER) -> BasisSpec:
    """Build a clamped, uniformly spaced knot vector covering the data range.

    The domain is padded by 1e-6 of its width on each side so that
    observed extremes sit strictly inside it.
    """
    if not (np.isfinite(data_lo) and np.isfinite(data_hi)):
        raise ValueError("data range must be finite")
    if data_lo >= data_hi:
        raise ValueError("data_lo must be strictly below data_hi")
    if order < 1 or n_basis < order:
        raise ValueError("need n_basis >= order >= 1")
    pad = _DOMAIN_PAD * (data_hi - data_lo)
    lo, hi = data_lo - pad, data_hi + pad
    # n_basis - order interior knots; breakpoints are uniform in [lo, hi].
    breaks = np.linspace(lo, hi, n_basis - order + 2)
    knots = np.concatenate([np.full(order - 1, lo), breaks, np.full(order - 1, hi)])
    return BasisSpec(knots=knots, n_basis=n_basis, order=order)


def basis_values(spec: BasisSpec, points) -> np.ndarray:
    """Evaluate all basis functions at many points, vectorized.

    Points are clamped to [lo, hi] first. Returns shape (len(points),
    n_basis); each row is nonnegative, sums to one, and has at most
    ``order`` consecutive nonzero entries.
    """
    x = np.clip(np.asarray(points, dtype=float).ravel(), spec.lo, spec.hi)
    t = spec.knots
    p = spec.degree
    n = spec.n_basis
    span = np.searchsorted(t, x, side="right") - 1
    span = np.clip(span, p, n - 1)

    # Triangular Cox-de Boor scheme over the order nonzero functions.
    m = x.size
    values = np.zeros((m, p + 1))
    values[:, 0] = 1.0
    left = np.empty((m, p + 1))
    right = np.empty((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - t[span + 1 - j]
        right[:, j] = t[span + j] - x
        saved = np.zeros(m)
        for i in range(j):
            denom = right[:, i + 1] + left[:, j - i]
            ratio = np.where(denom > 0, values[:, i] / np.where(denom > 0, denom, 1.0), 0.0)
            values[:, i] = saved + right[:, i + 1] * ratio
            saved = left[:, j - i] * ratio
        values[:, j] = saved

    out = np.zeros((m, n))
    rows = np.arange(m)[:, np.newaxis]
    cols = span[:, np.newaxis] - p + np.arange(p + 1)[np.newaxis, :]
    out[rows, cols] = values
    return out


def eval_basis(spec: BasisSpec, x: float) -> np.ndarray:
    """Basis vector (length n_basis) at a single point."""
    return basis_values(spec, [x])[0]


def feature_matrix(spec: BasisSpec, states_at_t) -> FeatureMatrix:
    """Feature matrix for one time step: row k = basis at state k."""
    return FeatureMatrix(values=basis_values(spec, states_at_t))


def feature_cube(spec: BasisSpec, state_values: np.ndarray) -> np.ndarray:
    """Stack feature matrices for every time step.

    ``state_values`` has shape (K, T+1); the result has shape
    (T+1, K, n_basis).
    """
    state_values = np.asarray(state_values, dtype=float)
    n_paths, n_times = state_values.shape
    flat = basis_values(spec, state_values.T.ravel())
    return flat.reshape(n_times, n_paths, spec.n_basis)


def spec_for_states(state_values: np.ndarray, n_basis: int = DEFAULT_N_BASIS,
                    order: int = DEFAULT_ORDER) -> BasisSpec:
    """Spec spanning the global min/max of a state matrix."""
    return make_spec(float(np.min(state_values)), float(np.max(state_values)),
                     n_basis=n_basis, order=order)
