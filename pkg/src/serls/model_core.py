"""Problem data model: observations, design matrix, constraints, layout.

Everything here is an immutable value object.  Constructors validate and
normalize once; downstream numerical code can then assume well-formed
inputs and never mutates shared state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from serls.errors import (
    InvalidInputError,
    InvalidWeightsError,
    UnknownCharacteristicError,
)

logger = logging.getLogger(__name__)

_WEIGHT_SUM_TOL = 1e-12


def _as_float_vector(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _as_float_matrix(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def normalize_weights(w_raw) -> np.ndarray:
    """Scale nonnegative weights so they sum to one.

    Proportions are preserved; already-normalized input comes back
    unchanged up to the scaling division.  Raises
    :class:`InvalidWeightsError` on negative entries or an all-zero
    vector.
    """
    w = _as_float_vector(w_raw, "weights")
    if w.size == 0:
        raise InvalidWeightsError("weights must be non-empty")
    if np.any(w < 0):
        raise InvalidWeightsError("weights must be nonnegative")
    total = float(np.sum(w))
    if total <= 0.0:
        raise InvalidWeightsError("weights must include at least one positive entry")
    return w / total


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Dependent variable, raw design values, and normalized sample weights.

    Weights are normalized on construction (with a logged warning when the
    input did not already sum to one).  ``w_raw=None`` means uniform
    weights.  Intercept-only problems (zero predictor columns) are
    permitted.
    """

    y: np.ndarray
    x_raw: np.ndarray
    w: np.ndarray

    def __init__(self, y, x_raw, w_raw=None):
        y = _as_float_vector(y, "y")
        x_raw = _as_float_matrix(x_raw, "x_raw")
        n = y.shape[0]
        if n < 1:
            raise InvalidInputError("at least one observation is required")
        if x_raw.shape[0] != n:
            raise InvalidInputError(
                f"x_raw has {x_raw.shape[0]} rows but y has {n} entries"
            )
        if w_raw is None:
            w = np.full(n, 1.0 / n)
        else:
            w_in = _as_float_vector(w_raw, "weights")
            if w_in.shape[0] != n:
                raise InvalidInputError(
                    f"weights have {w_in.shape[0]} entries but y has {n}"
                )
            w = normalize_weights(w_in)
            if abs(float(np.sum(w_in)) - 1.0) > _WEIGHT_SUM_TOL:
                logger.warning(
                    "sample weights summed to %.6g; normalized to 1", float(np.sum(w_in))
                )
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x_raw", x_raw)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x_raw.shape[1]


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """n x (p+1) design whose first column is the intercept column of ones."""

    xr: np.ndarray

    def __post_init__(self):
        xr = _as_float_matrix(self.xr, "xr")
        if xr.shape[0] < 1 or xr.shape[1] < 1:
            raise InvalidInputError("design matrix must have at least one row and column")
        if not np.all(xr[:, 0] == 1.0):
            raise InvalidInputError("design matrix column 0 must be identically one")
        object.__setattr__(self, "xr", xr)

    @property
    def n(self) -> int:
        return self.xr.shape[0]

    @property
    def p(self) -> int:
        return self.xr.shape[1] - 1


def assemble_design(obs: ObservationSet) -> DesignMatrix:
    """Prepend the intercept column of ones to the raw predictor values."""
    ones = np.ones((obs.n, 1))
    return DesignMatrix(np.hstack([ones, obs.x_raw]))


@dataclass(frozen=True)
class PenaltySpec:
    """Nonnegative ridge penalty applied to the non-intercept coefficients."""

    lam: float = 0.0

    def __post_init__(self):
        lam = float(self.lam)
        if not np.isfinite(lam) or lam < 0.0:
            raise InvalidInputError(f"penalty must be a finite nonnegative scalar, got {lam}")
        object.__setattr__(self, "lam", lam)


def _triplets_to_matrix(triplets, n_rows, p, name):
    """Expand (row, col, value) triplets over S-columns 1..p into a dense
    (n_rows, p+1) matrix with a zero intercept column."""
    mat = np.zeros((n_rows, p + 1))
    for row, col, value in triplets:
        row = int(row)
        col = int(col)
        if not 0 <= row < n_rows:
            raise InvalidInputError(f"{name}: row index {row} out of range [0, {n_rows})")
        if col == 0:
            raise InvalidInputError(f"{name}: column 0 is the intercept and cannot be constrained")
        if not 1 <= col <= p:
            raise InvalidInputError(f"{name}: column index {col} out of range [1, {p}]")
        mat[row, col] += float(value)
    if not np.all(np.isfinite(mat)):
        raise InvalidInputError(f"{name}: constraint values must be finite")
    return mat


def _infer_rows(triplets):
    return 0 if not triplets else max(int(t[0]) for t in triplets) + 1


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Linear score-engineering constraints on the coefficient vector.

    ``air @ beta = iw`` (engineering equalities), ``acr @ beta = 0``
    (zero-sum equalities), ``apr @ beta <= 0`` (pattern inequalities).
    All three matrices act on the full (p+1)-vector but their intercept
    column is identically zero: only the score weights are constrained.
    """

    air: np.ndarray
    iw: np.ndarray
    acr: np.ndarray
    apr: np.ndarray

    def __post_init__(self):
        air = _as_float_matrix(self.air, "air")
        acr = _as_float_matrix(self.acr, "acr")
        apr = _as_float_matrix(self.apr, "apr")
        iw = _as_float_vector(self.iw, "iw")
        width = air.shape[1]
        if acr.shape[1] != width or apr.shape[1] != width:
            raise InvalidInputError("constraint matrices must share one column count")
        if air.shape[0] != iw.shape[0]:
            raise InvalidInputError(
                f"air has {air.shape[0]} rows but iw has {iw.shape[0]} targets"
            )
        for name, mat in (("air", air), ("acr", acr), ("apr", apr)):
            if mat.shape[0] > 0 and np.any(mat[:, 0] != 0.0):
                raise InvalidInputError(f"{name}: intercept column entries must all be zero")
        object.__setattr__(self, "air", air)
        object.__setattr__(self, "acr", acr)
        object.__setattr__(self, "apr", apr)
        object.__setattr__(self, "iw", iw)

    @classmethod
    def empty(cls, p: int) -> "ConstraintSet":
        width = p + 1
        return cls(
            air=np.zeros((0, width)),
            iw=np.zeros(0),
            acr=np.zeros((0, width)),
            apr=np.zeros((0, width)),
        )

    @classmethod
    def from_triplets(
        cls,
        p: int,
        equality=(),
        equality_targets=(),
        zero=(),
        inequality=(),
        n_zero_rows=None,
        n_inequality_rows=None,
    ) -> "ConstraintSet":
        """Build from sparse (row, col, value) triplets over S-columns 1..p.

        The zero intercept column is prepended here, so callers cannot
        accidentally constrain the intercept.  Row counts for the zero and
        inequality blocks default to one past the largest row index seen.
        """
        iw = _as_float_vector(np.asarray(equality_targets, dtype=np.float64), "iw")
        air = _triplets_to_matrix(equality, iw.shape[0], p, "equality")
        mc = _infer_rows(zero) if n_zero_rows is None else int(n_zero_rows)
        mp = _infer_rows(inequality) if n_inequality_rows is None else int(n_inequality_rows)
        acr = _triplets_to_matrix(zero, mc, p, "zero")
        apr = _triplets_to_matrix(inequality, mp, p, "inequality")
        return cls(air=air, iw=iw, acr=acr, apr=apr)

    @property
    def width(self) -> int:
        return self.air.shape[1]


@dataclass(frozen=True)
class CharacteristicLayout:
    """Ordered grouping of design columns into named characteristics.

    Column index 0 (the intercept) never belongs to a group; groups are
    disjoint and may jointly cover only part of the design.
    """

    groups: tuple = field(default_factory=tuple)

    def __init__(self, groups=()):
        seen = set()
        normalized = []
        for name, cols in groups:
            cols = tuple(sorted(int(c) for c in cols))
            if any(c < 1 for c in cols):
                raise InvalidInputError(
                    f"characteristic {name!r}: column indices must be >= 1 (0 is the intercept)"
                )
            overlap = seen.intersection(cols)
            if overlap:
                raise InvalidInputError(
                    f"characteristic {name!r}: columns {sorted(overlap)} already grouped"
                )
            seen.update(cols)
            normalized.append((str(name), cols))
        names = [name for name, _ in normalized]
        if len(names) != len(set(names)):
            raise InvalidInputError("characteristic names must be unique")
        object.__setattr__(self, "groups", tuple(normalized))

    @property
    def names(self):
        return [name for name, _ in self.groups]

    def columns(self, name: str):
        for group_name, cols in self.groups:
            if group_name == name:
                return cols
        raise UnknownCharacteristicError(f"unknown characteristic {name!r}")


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Fitted coefficient vector: intercept first, score weights after."""

    beta: np.ndarray

    def __post_init__(self):
        beta = _as_float_vector(self.beta, "beta")
        if beta.size < 1:
            raise InvalidInputError("coefficient vector must be non-empty")
        object.__setattr__(self, "beta", beta)

    @property
    def intercept(self) -> float:
        return float(self.beta[0])

    @property
    def weights(self) -> np.ndarray:
        return self.beta[1:]
