"""Weighted least squares under score-engineering constraints.

Assembles the quadratic program for the penalized weighted LS problem and
provides the scoring / error primitives shared by the robust and
marginal-contribution layers.  The Hessian block depends only on the
design, weights, and penalty, so it is built once and reused across
re-solves that merely swap the linear term (see
:func:`weighted_linear_term`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from serls.errors import InfeasibleError, InvalidInputError, SolveError
from serls.model_core import (
    Coefficients,
    ConstraintSet,
    DesignMatrix,
    ObservationSet,
    PenaltySpec,
)
from serls.qp import DEGENERATE, INFEASIBLE, OPTIMAL, QuadraticProgram, solve_qp


@dataclass(frozen=True, eq=False)
class EngineeredProblem:
    """A fitting problem: observations, design, constraints, penalty."""

    obs: ObservationSet
    design: DesignMatrix
    constraints: ConstraintSet
    penalty: PenaltySpec

    def __post_init__(self):
        if self.design.n != self.obs.n:
            raise InvalidInputError(
                f"design has {self.design.n} rows but observations have {self.obs.n}"
            )
        if self.design.p != self.obs.p:
            raise InvalidInputError(
                f"design has {self.design.p} predictor columns but x_raw has {self.obs.p}"
            )
        if self.constraints.width != self.design.p + 1:
            raise InvalidInputError(
                f"constraints are {self.constraints.width} wide but the design needs "
                f"{self.design.p + 1}"
            )

    @classmethod
    def from_observations(cls, obs, constraints=None, penalty=None):
        from serls.model_core import assemble_design

        return cls(
            obs=obs,
            design=assemble_design(obs),
            constraints=constraints if constraints is not None else ConstraintSet.empty(obs.p),
            penalty=penalty if penalty is not None else PenaltySpec(0.0),
        )


def weighted_linear_term(xr: np.ndarray, w: np.ndarray, y_target: np.ndarray) -> np.ndarray:
    """Linear QP term -2 * Xr' (w .* y).

    Every path that rebuilds the linear term (initial fit, winsorized
    re-solves) must go through this one expression so that identical
    targets produce bit-identical terms.
    """
    return -2.0 * (xr.T @ (w * y_target))


def build_engineered_qp(prob: EngineeredProblem, y_target) -> QuadraticProgram:
    """Assemble the QP whose solution is the constrained penalized fit.

    The quadratic block is ``2 (Xr' W Xr + (lambda/n) Ipen)`` where Ipen is
    the identity with the intercept entry zeroed, so the intercept is never
    penalized.  Equalities stack the engineering targets over the zero-sum
    rows; inequalities pass through with zero right-hand side.  The
    returned object can be re-solved against a new target by replacing
    only ``f`` (the Hessian and constraint blocks are target-independent).
    """
    y_target = np.asarray(y_target, dtype=np.float64)
    if y_target.ndim != 1 or y_target.shape[0] != prob.obs.n:
        raise InvalidInputError(
            f"y_target must be a vector of length {prob.obs.n}, got shape {y_target.shape}"
        )
    if not np.all(np.isfinite(y_target)):
        raise InvalidInputError("y_target contains non-finite values")
    xr = prob.design.xr
    w = prob.obs.w
    n = prob.obs.n
    width = prob.design.p + 1
    penalty_eye = np.eye(width)
    penalty_eye[0, 0] = 0.0
    h = 2.0 * (xr.T @ (w[:, None] * xr) + (prob.penalty.lam / n) * penalty_eye)
    h = (h + h.T) / 2.0
    f = weighted_linear_term(xr, w, y_target)
    cons = prob.constraints
    a_eq = np.vstack([cons.air, cons.acr])
    b_eq = np.concatenate([cons.iw, np.zeros(cons.acr.shape[0])])
    return QuadraticProgram(
        h=h,
        f=f,
        a_ineq=cons.apr,
        b_ineq=np.zeros(cons.apr.shape[0]),
        a_eq=a_eq,
        b_eq=b_eq,
    )


def retarget_qp(qp: QuadraticProgram, xr, w, y_target) -> QuadraticProgram:
    """New QP sharing every block of ``qp`` except the linear term."""
    return replace(qp, f=weighted_linear_term(xr, w, np.asarray(y_target, dtype=np.float64)))


def solve_engineered_qp(qp: QuadraticProgram) -> Coefficients:
    """Solve an assembled problem, accepting the degenerate (rank-
    deficient) path and failing loudly otherwise."""
    sol = solve_qp(qp)
    if sol.status == INFEASIBLE:
        raise InfeasibleError(
            f"score-engineering constraints are infeasible "
            f"(certificate row {sol.infeasible_row})",
            row=sol.infeasible_row,
        )
    if sol.status not in (OPTIMAL, DEGENERATE):
        raise SolveError(
            f"quadratic program solve failed with status {sol.status!r} "
            f"(kkt residual {sol.kkt_residual:.3e})"
        )
    return Coefficients(sol.beta)


def fit_engineered_ls(prob: EngineeredProblem, y_target=None) -> Coefficients:
    """Constrained penalized weighted least squares fit.

    ``y_target`` defaults to the observed outcomes; the robust layer
    passes winsorized pseudo-outcomes instead.
    """
    if y_target is None:
        y_target = prob.obs.y
    return solve_engineered_qp(build_engineered_qp(prob, y_target))


def fit_objective(prob: EngineeredProblem, beta: Coefficients, y_target=None) -> float:
    """Full fitting criterion: weighted SSE plus the ridge term.

    The QP drops the constant ``y' W y`` from its objective; reporting adds
    it back so the value quoted to users is the original criterion.
    """
    if y_target is None:
        y_target = prob.obs.y
    y_target = np.asarray(y_target, dtype=np.float64)
    e = y_target - prob.design.xr @ beta.beta
    sse = float(np.dot(prob.obs.w, e * e))
    s = beta.weights
    return sse + (prob.penalty.lam / prob.obs.n) * float(np.dot(s, s))


def score(design: DesignMatrix, beta: Coefficients) -> np.ndarray:
    """Fitted scores Xr @ beta."""
    if beta.beta.shape[0] != design.p + 1:
        raise InvalidInputError(
            f"coefficients have length {beta.beta.shape[0]} but the design needs {design.p + 1}"
        )
    return design.xr @ beta.beta


def weighted_sse(errors, w) -> float:
    """Weighted sum of squared errors."""
    errors = np.asarray(errors, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if errors.shape != w.shape:
        raise InvalidInputError(
            f"errors and weights differ in shape: {errors.shape} vs {w.shape}"
        )
    return float(np.dot(w, errors * errors))
