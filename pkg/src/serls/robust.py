"""Robust (Huber) regression via iterative winsorization.

Each iteration clips the current residuals at k = m * sigma, where sigma
is 1.483 times the weighted median absolute residual, rebuilds the
pseudo-outcomes y* on the fitted line plus the clipped residuals, and
re-solves the same constrained least-squares QP against y*.  Only the
linear term of the QP changes between iterations; the Hessian and
constraint blocks are assembled once.  At an unconstrained fixed point
the clipped residuals are exactly half the Huber psi function, so the
iteration lands on a stationary point of the weighted Huber objective at
the final threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from serls import kernels
from serls.engineered import (
    EngineeredProblem,
    build_engineered_qp,
    retarget_qp,
    solve_engineered_qp,
)
from serls.errors import InvalidInputError, SolveError
from serls.model_core import Coefficients

ROBUST_SCALE_FACTOR = 1.483

# Relative floor under which the robust scale counts as zero: more than
# half the weight sits on (numerically) zero residuals and clipping at
# k = 0 would freeze the iteration.
_DEGENERATE_SCALE_TOL = 1e-12


def huber_loss(e, k):
    """Loss that is quadratic inside [-k, k] and linear (slope 2k) outside.

    Accepts scalars or arrays.
    """
    if k <= 0.0:
        raise InvalidInputError(f"threshold k must be positive, got {k}")
    e = np.asarray(e, dtype=np.float64)
    ae = np.abs(e)
    out = np.where(ae <= k, e * e, 2.0 * k * ae - k * k)
    return float(out) if out.ndim == 0 else out


def weighted_median(x, w) -> float:
    """Lower weighted median: smallest sorted value whose cumulative
    weight reaches one half.  Minimizes sum_i w_i |x_i - m| over m."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim != 1 or w.ndim != 1 or x.shape != w.shape:
        raise InvalidInputError(
            f"values and weights must be equal-length vectors, got {x.shape} and {w.shape}"
        )
    if x.size == 0:
        raise InvalidInputError("weighted median of empty input")
    if np.any(w < 0) or not np.any(w > 0):
        raise InvalidInputError("weights must be nonnegative with at least one positive entry")
    return kernels.weighted_median(x, w)


def robust_scale(abs_errors, w) -> float:
    """Robust residual standard deviation: 1.483 times the weighted
    median absolute residual (consistent for normal residuals)."""
    abs_errors = np.asarray(abs_errors, dtype=np.float64)
    if np.any(abs_errors < 0):
        raise InvalidInputError("absolute errors must be nonnegative")
    return ROBUST_SCALE_FACTOR * weighted_median(abs_errors, w)


def winsorize_residuals(e, k) -> np.ndarray:
    """Clip residuals to [-k, k] (sign-preserving, boundary kept)."""
    if k <= 0.0:
        raise InvalidInputError(f"threshold k must be positive, got {k}")
    e = np.asarray(e, dtype=np.float64)
    return kernels.winsorize(e, k)


@dataclass(frozen=True)
class RobustConfig:
    """Iteration controls: cap M, convergence bound on max |delta beta|,
    and the scale multiple m defining the clipping threshold."""

    max_iterations: int = 50
    epsilon: float | None = None
    m: float = 1.5

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise InvalidInputError("max_iterations must be at least 1")
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise InvalidInputError("epsilon must be positive")
        if not self.m > 0.0:
            raise InvalidInputError("m must be positive")
        object.__setattr__(self, "max_iterations", int(self.max_iterations))

    def resolve_epsilon(self, beta0: np.ndarray) -> float:
        """Default tolerance scales with the initial coefficient size."""
        if self.epsilon is not None:
            return float(self.epsilon)
        return 1e-6 * (1.0 + float(np.max(np.abs(beta0))))


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """One re-solve: scale, threshold, and coefficient movement."""

    iteration: int
    sigma: float
    k: float
    max_delta: float
    beta: np.ndarray


@dataclass(frozen=True, eq=False)
class RobustFitResult:
    """Converged coefficients plus the winsorization byproducts.

    ``e_star`` and ``y_star`` are evaluated at the returned ``beta`` and
    threshold ``k``, so ``y_star == Xr @ beta + e_star`` and
    ``|e_star| <= k`` hold by construction.
    """

    beta: Coefficients
    iterations: int
    sigma: float
    k: float
    e_star: np.ndarray
    y_star: np.ndarray
    converged: bool
    degenerate_scale: bool = False
    trace: tuple = ()


def _weighted_mean_abs(y, w) -> float:
    return float(np.dot(w, np.abs(y)))


def winsorized_state(beta_vec, k, y, xr):
    """Clipped residuals and pseudo-outcomes at given coefficients.

    Unclipped entries keep the original outcome bits (the identity
    y = Xr beta + e holds exactly there); clipped entries rebuild the
    outcome on the fitted line.  ``k = 0`` zeroes every residual and
    ``k = inf`` clips nothing.
    """
    fitted = xr @ beta_vec
    e = y - fitted
    if k <= 0.0:
        e_star = np.zeros_like(e)
        return e_star, fitted.copy()
    e_star = kernels.winsorize(e, k)
    y_star = np.where(e_star != e, fitted + e_star, y)
    return e_star, y_star


def fit_robust(prob: EngineeredProblem, cfg: RobustConfig | None = None) -> RobustFitResult:
    """Score-engineered robust least squares.

    Starts from the plain constrained LS fit, then alternates
    winsorization of the residuals (at m times the robust scale) with QP
    re-solves against the pseudo-outcomes, until the coefficients move by
    at most epsilon or the iteration cap is hit.  The returned
    byproducts (sigma, k, e*, y*) are evaluated at the final
    coefficients.

    A zero robust scale (over half the weight on exact-fit residuals)
    ends the iteration immediately with ``degenerate_scale`` set: the
    current fit already matches the weighted majority of the data.
    """
    if cfg is None:
        cfg = RobustConfig()
    xr = prob.design.xr
    y = prob.obs.y
    w = prob.obs.w
    scale_floor = _DEGENERATE_SCALE_TOL * (1.0 + _weighted_mean_abs(y, w))

    qp0 = build_engineered_qp(prob, y)
    beta = solve_engineered_qp(qp0).beta
    epsilon = cfg.resolve_epsilon(beta)

    count = 1
    beta_old = beta.copy()
    beta_old[0] = beta[0] + 2.0 * epsilon
    trace = []

    while float(np.max(np.abs(beta_old - beta))) > epsilon and count < cfg.max_iterations:
        beta_old = beta
        count += 1
        fitted = xr @ beta
        abs_err = np.abs(y - fitted)
        sigma = robust_scale(abs_err, w)
        if sigma < scale_floor:
            e_star = np.zeros_like(y)
            trace.append(IterationRecord(count, sigma, 0.0, 0.0, beta.copy()))
            return RobustFitResult(
                beta=Coefficients(beta),
                iterations=count,
                sigma=sigma,
                k=0.0,
                e_star=e_star,
                y_star=fitted.copy(),
                converged=True,
                degenerate_scale=True,
                trace=tuple(trace),
            )
        k = cfg.m * sigma
        e_star, y_star = winsorized_state(beta, k, y, xr)
        try:
            beta = solve_engineered_qp(retarget_qp(qp0, xr, w, y_star)).beta
        except SolveError as exc:
            raise SolveError(f"QP re-solve failed at iteration {count}: {exc}") from exc
        max_delta = float(np.max(np.abs(beta_old - beta)))
        trace.append(IterationRecord(count, sigma, k, max_delta, beta.copy()))

    converged = float(np.max(np.abs(beta_old - beta))) <= epsilon

    # Final winsorization state at the converged coefficients, so the
    # stored byproducts are consistent with the returned beta.
    abs_err = np.abs(y - xr @ beta)
    sigma = robust_scale(abs_err, w)
    degenerate = sigma < scale_floor
    k = 0.0 if degenerate else cfg.m * sigma
    e_star, y_star = winsorized_state(beta, k, y, xr)
    return RobustFitResult(
        beta=Coefficients(beta),
        iterations=count,
        sigma=sigma,
        k=k,
        e_star=e_star,
        y_star=y_star,
        converged=True if degenerate else converged,
        degenerate_scale=degenerate,
        trace=tuple(trace),
    )


def huber_objective(beta: Coefficients, prob: EngineeredProblem, k: float) -> float:
    """Weighted Huber objective at given coefficients and threshold.

    Diagnostic only; the fitting loop never evaluates it.
    """
    if k <= 0.0:
        raise InvalidInputError(f"threshold k must be positive, got {k}")
    beta_vec = beta.beta if isinstance(beta, Coefficients) else np.asarray(beta, dtype=np.float64)
    if beta_vec.shape[0] != prob.design.p + 1:
        raise InvalidInputError(
            f"coefficients have length {beta_vec.shape[0]} but the design needs "
            f"{prob.design.p + 1}"
        )
    e = prob.obs.y - prob.design.xr @ beta_vec
    return kernels.huber_sum(e, prob.obs.w, k)
