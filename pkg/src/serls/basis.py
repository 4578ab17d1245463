"""B-spline basis columns for candidate characteristics.

Clamped knot vector (boundary knots repeated degree+1 times), so the
basis spans constants and each evaluation row is a partition of unity.
Values outside the domain are clamped to the boundary rather than
rejected, because validation samples routinely exceed development ranges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from serls import kernels
from serls.errors import InvalidInputError

MAX_DEGREE = 5


@dataclass(frozen=True)
class SplineSpec:
    """Interior knots, polynomial degree, and evaluation domain."""

    knots: tuple
    degree: int = 3
    domain: tuple = (0.0, 1.0)

    def __init__(self, knots=(), degree=3, domain=(0.0, 1.0)):
        knots = tuple(float(k) for k in knots)
        degree = int(degree)
        lo, hi = (float(domain[0]), float(domain[1]))
        if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
            raise InvalidInputError(f"domain must be a finite interval [lo, hi], got {domain}")
        if degree < 0 or degree > MAX_DEGREE:
            raise InvalidInputError(f"degree must be in [0, {MAX_DEGREE}], got {degree}")
        if any(not np.isfinite(k) for k in knots):
            raise InvalidInputError("knots must be finite")
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise InvalidInputError("knots must be strictly increasing")
        if knots and (knots[0] <= lo or knots[-1] >= hi):
            raise InvalidInputError("knots must lie strictly inside the open domain interval")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "domain", (lo, hi))

    @property
    def n_columns(self) -> int:
        return len(self.knots) + self.degree + 1

    def full_knot_vector(self) -> np.ndarray:
        lo, hi = self.domain
        return np.concatenate(
            [
                np.full(self.degree + 1, lo),
                np.asarray(self.knots, dtype=np.float64),
                np.full(self.degree + 1, hi),
            ]
        )


def bspline_basis(x, spec: SplineSpec) -> np.ndarray:
    """Basis matrix with one row per evaluation point.

    Rows are nonnegative, have at most degree+1 nonzero entries, and sum
    to one.  Out-of-domain points are clamped to the nearer boundary.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError(f"x must be one-dimensional, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x contains non-finite values")
    lo, hi = spec.domain
    clamped = np.clip(x, lo, hi)
    return kernels.bspline_design(clamped, spec.full_knot_vector(), spec.degree)
