"""Pure NumPy implementations of the hot kernels.

Reference semantics for the compiled twin in ``_native.pyx``; both must
return the same values (weighted_median and winsorize exactly, the
floating-sum kernels up to summation order).
"""

import numpy as np

# Slack below the half-weight threshold so that cumulative sums which are
# mathematically exactly 0.5 are not skipped due to rounding.
_MEDIAN_SLACK = 1e-12


def weighted_median(values, weights):
    """Lower weighted median: the smallest value whose cumulative weight
    in sorted order reaches half the total weight."""
    order = np.argsort(values, kind="stable")
    cumulative = np.cumsum(weights[order])
    total = cumulative[-1]
    threshold = 0.5 * total - _MEDIAN_SLACK * max(1.0, total)
    idx = int(np.searchsorted(cumulative, threshold, side="left"))
    if idx >= values.shape[0]:
        idx = values.shape[0] - 1
    return float(values[order[idx]])


def winsorize(e, k):
    """Clip residuals to [-k, k]; entries already inside pass through
    with their bits unchanged."""
    return np.clip(e, -k, k)


def huber_sum(e, w, k):
    """Weighted sum of the Huber loss: quadratic inside [-k, k], linear
    with slope 2k outside, continuous at the knee."""
    ae = np.abs(e)
    per_point = np.where(ae <= k, e * e, 2.0 * k * ae - k * k)
    return float(np.dot(w, per_point))


def bspline_design(x, knots_full, degree):
    """Evaluate all B-spline basis functions on a clamped knot vector.

    ``knots_full`` has the boundary knots repeated degree+1 times; the
    basis has ``len(knots_full) - degree - 1`` functions.  ``x`` must
    already be clamped to [knots_full[0], knots_full[-1]].  Uses the
    two-term recursion on indicator columns, vectorized over points.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(knots_full, dtype=np.float64)
    q = t.shape[0] - degree - 1
    n_intervals = t.shape[0] - 1
    # Degree-0 indicators, right-closed on the last non-degenerate interval.
    basis = np.zeros((x.shape[0], n_intervals))
    for m in range(n_intervals):
        if t[m + 1] > t[m]:
            basis[:, m] = (x >= t[m]) & (x < t[m + 1])
    last = max(m for m in range(n_intervals) if t[m + 1] > t[m])
    basis[x == t[-1], last] = 1.0

    for d in range(1, degree + 1):
        new_cols = n_intervals - d
        new_basis = np.zeros((x.shape[0], new_cols))
        for m in range(new_cols):
            left_den = t[m + d] - t[m]
            right_den = t[m + d + 1] - t[m + 1]
            term = 0.0
            if left_den > 0.0:
                term = (x - t[m]) / left_den * basis[:, m]
            if right_den > 0.0:
                term = term + (t[m + d + 1] - x) / right_den * basis[:, m + 1]
            new_basis[:, m] = term
        basis = new_basis
    return np.ascontiguousarray(basis[:, :q])
