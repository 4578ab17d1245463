"""Step I / Step II marginal contributions on winsorized outcomes.

The Huber objective itself is unusable for contribution ranking (a few
large errors dominate its level even though they enter linearly), so both
steps work with the winsorized errors and pseudo-outcomes produced by the
robust fit:

* Step I removes a fitted characteristic by zeroing its score weights --
  without re-solving, and therefore possibly off the constraint surface --
  and measures how much the normalized winsorized error grows.
* Step II adds a candidate characteristic: plain least squares of y* on an
  intercept, the candidate's spline basis columns, and the existing score
  with its coefficient pinned to one, measuring how much the normalized
  error shrinks.

Both run on the development sample or, with the development threshold k
carried over, on a validation sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from serls.basis import bspline_basis
from serls.engineered import EngineeredProblem, weighted_sse
from serls.errors import DegenerateVarianceError, InvalidInputError, SolveError
from serls.model_core import CharacteristicLayout, DesignMatrix, ObservationSet
from serls.qp import MAX_ITERATIONS, QuadraticProgram, solve_qp
from serls.robust import RobustFitResult, winsorized_state

DEVELOPMENT = "development"
VALIDATION = "validation"

_RLSV_FLOOR = 1e-300


@dataclass(frozen=True)
class MarginalReport:
    """Objective value and per-characteristic contributions for one sample."""

    of: float
    rlsv_y: float
    sse_star: float
    step1: tuple
    step2: tuple
    sample_label: str


def _objective_terms(e_star, y_star, intercept, w):
    sse_star = weighted_sse(e_star, w)
    centered = y_star - intercept
    rlsv = float(np.dot(w, centered * centered))
    if rlsv <= _RLSV_FLOOR:
        raise DegenerateVarianceError(
            "winsorized outcome variance about the intercept is zero"
        )
    return sse_star, rlsv, sse_star / rlsv


def step1_objective(fit: RobustFitResult, w) -> tuple[float, float, float]:
    """(SSE*, RLSV_y, OF) from the stored winsorization byproducts.

    SSE* is the weighted sum of squared clipped residuals; RLSV_y is the
    weighted spread of the pseudo-outcomes about the intercept (the
    intercept stands in for a robust outcome mean when the score columns
    are centered); OF is their ratio.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.shape != fit.e_star.shape:
        raise InvalidInputError(
            f"weights have shape {w.shape} but the fit has {fit.e_star.shape}"
        )
    return _objective_terms(fit.e_star, fit.y_star, fit.beta.intercept, w)


def _zeroed(beta_vec, cols):
    out = beta_vec.copy()
    out[list(cols)] = 0.0
    return out


def _step1_value(beta_vec, cols, y_star, xr, w, rlsv, of):
    beta_zeroed = _zeroed(beta_vec, cols)
    e_dropped = y_star - xr @ beta_zeroed
    return weighted_sse(e_dropped, w) / rlsv - of


def step1_marginal(
    fit: RobustFitResult,
    prob: EngineeredProblem,
    layout: CharacteristicLayout,
    char_name: str,
) -> float:
    """Step I contribution of one fitted characteristic.

    Zeroes the characteristic's score weights (intercept untouched, no
    re-fit) and returns the increase in SSE/RLSV over the full model's
    objective.  Slightly negative values are possible for penalized or
    constrained fits and are reported as computed.
    """
    cols = layout.columns(char_name)
    w = prob.obs.w
    _, rlsv, of = step1_objective(fit, w)
    return _step1_value(fit.beta.beta, cols, fit.y_star, prob.design.xr, w, rlsv, of)


def _step2_value(y_star, s, basis_cols, w, rlsv, of):
    n = y_star.shape[0]
    z = np.hstack([np.ones((n, 1)), basis_cols, s[:, None]])
    h = 2.0 * (z.T @ (w[:, None] * z))
    h = (h + h.T) / 2.0
    f = -2.0 * (z.T @ (w * y_star))
    pin_row = np.zeros((1, z.shape[1]))
    pin_row[0, -1] = 1.0
    qp = QuadraticProgram(
        h=h,
        f=f,
        a_ineq=np.zeros((0, z.shape[1])),
        b_ineq=np.zeros(0),
        a_eq=pin_row,
        b_eq=np.ones(1),
    )
    sol = solve_qp(qp)
    if sol.status == MAX_ITERATIONS:
        raise SolveError("auxiliary least-squares solve did not converge")
    fitted = z @ sol.beta
    e_two = y_star - fitted
    return of - weighted_sse(e_two, w) / rlsv


def step2_marginal(
    fit: RobustFitResult,
    prob: EngineeredProblem,
    basis_cols,
    w,
) -> float:
    """Step II contribution of a candidate characteristic.

    Fits y* by unpenalized least squares on [intercept | basis | score]
    with the score coefficient pinned to one, and returns the drop in
    SSE/RLSV below the current objective.  The zero point (intercept and
    basis coefficients all zero) reproduces the current fit, so the value
    is nonnegative up to solver precision.  The basis columns sum to one
    per row, so the auxiliary design is rank deficient by construction
    and goes through the solver's degenerate (minimum-norm) path.
    """
    basis_cols = np.asarray(basis_cols, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if basis_cols.ndim != 2 or basis_cols.shape[0] != fit.y_star.shape[0]:
        raise InvalidInputError(
            f"basis columns must have {fit.y_star.shape[0]} rows, got {basis_cols.shape}"
        )
    if not np.all(np.isfinite(basis_cols)):
        raise InvalidInputError("basis columns contain non-finite values")
    _, rlsv, of = step1_objective(fit, w)
    s = prob.design.xr @ fit.beta.beta
    return _step2_value(fit.y_star, s, basis_cols, w, rlsv, of)


def _build_report(beta, k, obs, design, layout, step2_items, label):
    e_star, y_star = winsorized_state(beta.beta, k, obs.y, design.xr)
    w = obs.w
    sse_star, rlsv, of = _objective_terms(e_star, y_star, beta.intercept, w)
    xr = design.xr
    step1 = tuple(
        (name, _step1_value(beta.beta, cols, y_star, xr, w, rlsv, of))
        for name, cols in layout.groups
    )
    s = xr @ beta.beta
    step2 = []
    for name, values, spec in step2_items:
        cols = bspline_basis(np.asarray(values, dtype=np.float64), spec)
        step2.append((name, _step2_value(y_star, s, cols, w, rlsv, of)))
    return MarginalReport(
        of=of,
        rlsv_y=rlsv,
        sse_star=sse_star,
        step1=step1,
        step2=tuple(step2),
        sample_label=label,
    )


def development_report(
    fit: RobustFitResult,
    prob: EngineeredProblem,
    layout: CharacteristicLayout,
    step2_items=(),
) -> MarginalReport:
    """Full report on the development sample.

    ``step2_items`` is a sequence of ``(name, values, SplineSpec)``
    triples, one per candidate characteristic; ``values`` are that
    characteristic's raw values on this sample.
    """
    return _build_report(
        fit.beta, fit.k, prob.obs, prob.design, layout, step2_items, DEVELOPMENT
    )


def evaluate_on_sample(
    fit: RobustFitResult,
    val_obs: ObservationSet,
    val_design: DesignMatrix,
    layout: CharacteristicLayout,
    step2_items=(),
) -> MarginalReport:
    """Report on a held-out sample using the development fit.

    Residuals are winsorized with the development threshold k (the
    clipping envelope is a property of the fitted model, and letting
    validation outliers re-estimate it would defeat the point), while
    weights come from the validation sample itself.
    """
    if val_design.n != val_obs.n:
        raise InvalidInputError(
            f"validation design has {val_design.n} rows but observations have {val_obs.n}"
        )
    if val_design.p + 1 != fit.beta.beta.shape[0]:
        raise InvalidInputError(
            f"validation design width {val_design.p + 1} does not match the "
            f"fitted coefficients ({fit.beta.beta.shape[0]})"
        )
    return _build_report(
        fit.beta, fit.k, val_obs, val_design, layout, step2_items, VALIDATION
    )


def uncentered_columns(design: DesignMatrix, w, tol: float = 1e-6):
    """Indices of non-intercept columns whose weighted mean exceeds tol.

    The intercept only reads as a robust outcome mean when the score
    columns are centered; reports warn when they are not.
    """
    w = np.asarray(w, dtype=np.float64)
    means = w @ design.xr[:, 1:]
    return [int(j) + 1 for j in np.where(np.abs(means) > tol)[0]]
