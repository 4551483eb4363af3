"""Metric spaces for the two supported response types.

Symmetric matrices carry the Frobenius metric; one-dimensional
distributions are represented as quantile functions on a fixed grid of
levels and carry the L2-Wasserstein metric (the L2 distance between
quantile functions, integrated over the observed grid range with the
trapezoid rule). Both spaces admit closed-form weighted Fréchet means,
which is what keeps the alternating estimator in ``regression`` cheap.

All types are immutable after construction and all operations are pure,
so they are safe to share across concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import (
    DimensionMismatch,
    GridMismatch,
    InvariantError,
    NearSingularDenominator,
)

# Inputs asymmetric (or decreasing) beyond this are rejected; smaller
# violations are repaired at construction.
SYMMETRY_TOL = 1e-8
MONOTONE_TOL = 1e-8

# |sum of coefficients| at or below this is treated as a singular
# denominator in the closed-form weighted means.
DENOM_GUARD = 1e-10

_GRID_ATOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Symmetric q x q matrix response.

    Inputs asymmetric beyond ``SYMMETRY_TOL`` are rejected; smaller
    asymmetries are repaired as (A + A.T)/2. All entries must be finite.
    """

    values: np.ndarray

    def __post_init__(self):
        a = np.array(self.values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvariantError("matrix entries must be finite")
        if a.size:
            asym = float(np.max(np.abs(a - a.T)))
            if asym > SYMMETRY_TOL:
                raise InvariantError(
                    f"matrix asymmetry {asym:.3e} exceeds tolerance {SYMMETRY_TOL:.0e}"
                )
            a = (a + a.T) / 2.0
        object.__setattr__(self, "values", _freeze(a))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class QuantileFunction:
    """Quantile function sampled on a fixed grid of levels in (0, 1).

    ``grid`` must be strictly increasing with at least two levels, all in
    (0, 1); ``values`` must be non-decreasing. Decreases within
    ``MONOTONE_TOL`` are repaired by a running maximum; larger violations
    are rejected.
    """

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.array(self.grid, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float).reshape(-1)
        if g.shape[0] < 2:
            raise InvariantError("quantile grid needs at least two levels")
        if v.shape[0] != g.shape[0]:
            raise DimensionMismatch(
                f"{v.shape[0]} values for a grid of {g.shape[0]} levels"
            )
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(v)):
            raise InvariantError("quantile grid and values must be finite")
        if g[0] <= 0.0 or g[-1] >= 1.0 or np.any(np.diff(g) <= 0.0):
            raise InvariantError("grid levels must be strictly increasing within (0, 1)")
        drop = float(np.min(np.diff(v))) if v.shape[0] > 1 else 0.0
        if drop < -MONOTONE_TOL:
            raise InvariantError(
                f"quantile values decrease by {-drop:.3e}, beyond tolerance {MONOTONE_TOL:.0e}"
            )
        if drop < 0.0:
            v = np.maximum.accumulate(v)
        object.__setattr__(self, "grid", _freeze(g))
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_levels(self) -> int:
        return self.grid.shape[0]


MetricObject = Union[SymMatrix, QuantileFunction]


def trapezoid_weights(grid) -> np.ndarray:
    """Trapezoid-rule quadrature weights over the observed grid range."""
    g = np.asarray(grid, dtype=float)
    w = np.empty_like(g)
    w[0] = (g[1] - g[0]) / 2.0
    w[-1] = (g[-1] - g[-2]) / 2.0
    if g.shape[0] > 2:
        w[1:-1] = (g[2:] - g[:-2]) / 2.0
    return w


def _check_grids(a: QuantileFunction, b: QuantileFunction) -> None:
    if a.grid.shape != b.grid.shape or np.max(np.abs(a.grid - b.grid)) > _GRID_ATOL:
        raise GridMismatch("quantile functions are defined on different grids")


def frobenius_distance(a: SymMatrix, b: SymMatrix) -> float:
    """Frobenius distance sqrt(tr[(A-B)^T (A-B)]) between symmetric matrices."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"matrix dims differ: {a.dim} vs {b.dim}")
    return float(np.linalg.norm(a.values - b.values))


def wasserstein_distance(a: QuantileFunction, b: QuantileFunction) -> float:
    """L2-Wasserstein distance = L2 norm of the quantile-function difference.

    The norm is evaluated with the trapezoid rule over the observed grid
    range, so on the standard 81-point grid over [0.1, 0.9] a constant
    offset c has distance |c| * sqrt(0.8).
    """
    _check_grids(a, b)
    diff = a.values - b.values
    return float(np.sqrt(trapezoid_weights(a.grid) @ (diff * diff)))


def distance(a: MetricObject, b: MetricObject) -> float:
    """Metric distance between two responses of the same kind."""
    if isinstance(a, SymMatrix) and isinstance(b, SymMatrix):
        return frobenius_distance(a, b)
    if isinstance(a, QuantileFunction) and isinstance(b, QuantileFunction):
        return wasserstein_distance(a, b)
    raise DimensionMismatch(
        f"cannot mix response kinds: {type(a).__name__} vs {type(b).__name__}"
    )


def monotone_projection(values, weights=None) -> np.ndarray:
    """Weighted pool-adjacent-violators projection onto non-decreasing vectors.

    With the trapezoid weights this is the metric projection onto the space
    of quantile functions, so projected weighted averages keep their
    Fréchet-mean interpretation. Already-monotone input is returned as is.
    """
    v = np.asarray(values, dtype=float)
    if np.all(np.diff(v) >= 0.0):
        return v.copy()
    res = isotonic_regression(v, weights=weights, increasing=True)
    return np.asarray(res.x, dtype=float)


def _guarded_sum(coeffs: np.ndarray) -> float:
    s = float(coeffs.sum())
    if abs(s) <= DENOM_GUARD:
        raise NearSingularDenominator(
            f"coefficient sum {s:.3e} is within {DENOM_GUARD:.0e} of zero"
        )
    return s


def weighted_mean_matrix(objects: Sequence[SymMatrix], coeffs) -> SymMatrix:
    """Closed-form weighted Fréchet mean under the Frobenius metric.

    Returns sum_i c_i Y_i / sum_i c_i; coefficients may be negative (they
    are products of robust weights and leverages), but their sum must stay
    away from zero.
    """
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if len(objects) != c.shape[0]:
        raise DimensionMismatch(f"{len(objects)} matrices but {c.shape[0]} coefficients")
    dims = {o.dim for o in objects}
    if len(dims) != 1:
        raise DimensionMismatch(f"matrices of mixed dims {sorted(dims)}")
    s = _guarded_sum(c)
    stacked = np.stack([o.values for o in objects])
    return SymMatrix(np.tensordot(c, stacked, axes=1) / s)


def weighted_mean_quantile(objects: Sequence[QuantileFunction], coeffs) -> QuantileFunction:
    """Closed-form weighted Fréchet mean under the L2-Wasserstein metric.

    The coefficient-weighted average of the value vectors, followed by the
    monotone projection (a no-op for positive coefficients) so the result
    is a valid quantile function.
    """
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if len(objects) != c.shape[0]:
        raise DimensionMismatch(f"{len(objects)} functions but {c.shape[0]} coefficients")
    first = objects[0]
    for other in objects[1:]:
        _check_grids(first, other)
    s = _guarded_sum(c)
    stacked = np.stack([o.values for o in objects])
    raw = np.tensordot(c, stacked, axes=1) / s
    projected = monotone_projection(raw, weights=trapezoid_weights(first.grid))
    return QuantileFunction(first.grid, projected)


class ResponseSpace:
    """Stacked, vectorized view of a homogeneous response sample.

    Rows of ``values`` are flattened responses; the fitting loops in
    ``regression`` work on this representation and only materialize
    :class:`SymMatrix` / :class:`QuantileFunction` objects at the end.
    """

    __slots__ = ("kind", "values", "q", "grid", "tw")

    def __init__(self, responses: Sequence[MetricObject]):
        if not responses:
            raise DimensionMismatch("empty response sample")
        first = responses[0]
        if isinstance(first, SymMatrix):
            self.kind = "matrix"
            self.q = first.dim
            self.grid = None
            self.tw = None
            for i, o in enumerate(responses):
                if not isinstance(o, SymMatrix):
                    raise DimensionMismatch(f"response {i} is not a matrix")
                if o.dim != self.q:
                    raise DimensionMismatch(
                        f"response {i} has dim {o.dim}, expected {self.q}"
                    )
            vals = np.stack([o.values.reshape(-1) for o in responses])
        elif isinstance(first, QuantileFunction):
            self.kind = "distribution"
            self.q = None
            self.grid = first.grid
            self.tw = _freeze(trapezoid_weights(first.grid))
            for i, o in enumerate(responses):
                if not isinstance(o, QuantileFunction):
                    raise DimensionMismatch(f"response {i} is not a quantile function")
                _check_grids(first, o)
            vals = np.stack([o.values for o in responses])
        else:
            raise DimensionMismatch(f"unsupported response type {type(first).__name__}")
        self.values = _freeze(vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def flatten(self, obj: MetricObject) -> np.ndarray:
        if self.kind == "matrix":
            if not isinstance(obj, SymMatrix) or obj.dim != self.q:
                raise DimensionMismatch("object does not live in this matrix space")
            return obj.values.reshape(-1)
        if not isinstance(obj, QuantileFunction):
            raise DimensionMismatch("object does not live in this distribution space")
        _check_grids_raw(self.grid, obj.grid)
        return obj.values

    def to_object(self, row: np.ndarray) -> MetricObject:
        if self.kind == "matrix":
            return SymMatrix(row.reshape(self.q, self.q))
        return QuantileFunction(self.grid, row)

    def sq_distances(self, u: np.ndarray) -> np.ndarray:
        """d^2(Y_i, u) for every sample row, u given in flattened form."""
        resid = self.values - u
        if self.kind == "matrix":
            return np.einsum("nd,nd->n", resid, resid)
        return (resid * resid) @ self.tw

    def dist(self, u: np.ndarray, v: np.ndarray) -> float:
        diff = u - v
        if self.kind == "matrix":
            return float(np.sqrt(diff @ diff))
        return float(np.sqrt(self.tw @ (diff * diff)))

    def mean(self, coeffs: np.ndarray) -> np.ndarray:
        """Closed-form weighted Fréchet mean in flattened form.

        Unlike the public weighted-mean functions this requires a strictly
        positive coefficient sum: with non-positive total mass the closed
        form is a maximizer (or undefined), which would silently break the
        monotone descent of the alternating fit.
        """
        s = float(coeffs.sum())
        if s <= DENOM_GUARD:
            raise NearSingularDenominator(
                f"weighted coefficient sum {s:.3e} is not positive; "
                "nearly all observation mass was zeroed out"
            )
        raw = coeffs @ self.values / s
        if self.kind == "distribution":
            raw = monotone_projection(raw, weights=self.tw)
        return raw


def _check_grids_raw(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or np.max(np.abs(a - b)) > _GRID_ATOL:
        raise GridMismatch("quantile functions are defined on different grids")
