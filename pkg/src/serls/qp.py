"""Dense convex quadratic programming via a primal active-set method.

Solves

    minimize    (1/2) x' H x + f' x
    subject to  a_eq x = b_eq,  a_ineq x <= b_ineq,  lower <= x <= upper

for symmetric H that is positive definite on the null space of the
equality constraints.  Each active-set subproblem is an equality-
constrained QP solved through its symmetric indefinite KKT system.  The
returned solution carries Lagrange multipliers and a KKT residual so
callers can certify optimality independently.

Finite bounds are folded into inequality rows before solving: lower
bounds first (ascending coordinate), then upper bounds, appended after
the user-supplied rows.  Multipliers are reported against that folded
row order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from serls.errors import InvalidInputError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"
DEGENERATE = "degenerate"

DEFAULT_TOL = 1e-9

# Reduced-Hessian eigenvalue margin below which the problem is treated as
# degenerate (rank deficient); see solve_qp.
_PD_MARGIN = 1e-10
# Multipliers less negative than this are numerical noise, not a signal
# to leave the working set.
_MULTIPLIER_FLOOR = -1e-10


def _as_matrix(x, name, width=None):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if width is not None and arr.shape[0] > 0 and arr.shape[1] != width:
        raise InvalidInputError(f"{name} must have {width} columns, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def _as_vector(x, name, length=None):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InvalidInputError(f"{name} must have length {length}, got {arr.shape[0]}")
    return arr


@dataclass(frozen=True, eq=False)
class QuadraticProgram:
    """Problem data for :func:`solve_qp`.

    ``lower``/``upper`` are optional bound vectors; non-finite entries
    mean unbounded in that coordinate.
    """

    h: np.ndarray
    f: np.ndarray
    a_ineq: np.ndarray
    b_ineq: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        h = _as_matrix(self.h, "h")
        dim = h.shape[0]
        if h.shape[1] != dim:
            raise InvalidInputError(f"h must be square, got shape {h.shape}")
        scale = float(np.max(np.abs(h))) if h.size else 0.0
        if scale > 0.0 and float(np.max(np.abs(h - h.T))) > 1e-10 * scale:
            raise InvalidInputError("h must be symmetric (1e-10 relative tolerance)")
        f = _as_vector(self.f, "f", dim)
        if not np.all(np.isfinite(f)):
            raise InvalidInputError("f contains non-finite values")
        a_ineq = _as_matrix(self.a_ineq, "a_ineq", dim)
        b_ineq = _as_vector(self.b_ineq, "b_ineq", a_ineq.shape[0])
        a_eq = _as_matrix(self.a_eq, "a_eq", dim)
        b_eq = _as_vector(self.b_eq, "b_eq", a_eq.shape[0])
        for name, vec in (("b_ineq", b_ineq), ("b_eq", b_eq)):
            if not np.all(np.isfinite(vec)):
                raise InvalidInputError(f"{name} contains non-finite values")
        lower = self.lower
        upper = self.upper
        if lower is not None:
            lower = _as_vector(lower, "lower", dim)
        if upper is not None:
            upper = _as_vector(upper, "upper", dim)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "a_ineq", a_ineq)
        object.__setattr__(self, "b_ineq", b_ineq)
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "b_eq", b_eq)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        return float(0.5 * x @ self.h @ x + self.f @ x)


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Solution certificate: primal point, multipliers, KKT residual."""

    beta: np.ndarray
    status: str
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    kkt_residual: float
    iterations: int
    infeasible_row: int | None = None


def _fold_bounds(qp: QuadraticProgram) -> QuadraticProgram:
    """Rewrite finite bounds as inequality rows appended after user rows."""
    if qp.lower is None and qp.upper is None:
        return qp
    rows = [qp.a_ineq]
    rhs = [qp.b_ineq]
    dim = qp.dim
    if qp.lower is not None:
        for i in range(dim):
            if np.isfinite(qp.lower[i]):
                row = np.zeros(dim)
                row[i] = -1.0
                rows.append(row[None, :])
                rhs.append(np.array([-qp.lower[i]]))
    if qp.upper is not None:
        for i in range(dim):
            if np.isfinite(qp.upper[i]):
                row = np.zeros(dim)
                row[i] = 1.0
                rows.append(row[None, :])
                rhs.append(np.array([qp.upper[i]]))
    return replace(
        qp,
        a_ineq=np.vstack(rows),
        b_ineq=np.concatenate(rhs),
        lower=None,
        upper=None,
    )


def _kkt_terms(qp, beta, nu, mu):
    """The four KKT condition residuals (each as a scalar)."""
    stationarity = qp.h @ beta + qp.f
    if qp.a_eq.shape[0]:
        stationarity = stationarity + qp.a_eq.T @ nu
    if qp.a_ineq.shape[0]:
        stationarity = stationarity + qp.a_ineq.T @ mu
    r_stat = float(np.max(np.abs(stationarity))) if stationarity.size else 0.0
    r_eq = (
        float(np.max(np.abs(qp.a_eq @ beta - qp.b_eq))) if qp.a_eq.shape[0] else 0.0
    )
    if qp.a_ineq.shape[0]:
        slack = qp.a_ineq @ beta - qp.b_ineq
        r_ineq = float(max(0.0, np.max(slack)))
        r_dual = float(max(0.0, -np.min(mu))) if mu.size else 0.0
        r_comp = float(np.max(np.abs(mu * slack))) if mu.size else 0.0
    else:
        r_ineq = r_dual = r_comp = 0.0
    return r_stat, r_eq, r_ineq, r_dual, r_comp


def kkt_residual(qp: QuadraticProgram, sol: QpSolution) -> float:
    """Max residual over stationarity, feasibility, dual sign, and
    complementary slackness for a candidate solution.  Pure function."""
    folded = _fold_bounds(qp)
    beta = _as_vector(sol.beta, "beta", folded.dim)
    nu = _as_vector(sol.eq_multipliers, "eq_multipliers", folded.a_eq.shape[0])
    mu = _as_vector(sol.ineq_multipliers, "ineq_multipliers", folded.a_ineq.shape[0])
    return max(_kkt_terms(folded, beta, nu, mu))


def _solve_kkt(h, a_rows, rhs, force_lstsq=False):
    """Solve the symmetric indefinite KKT system [[H, A'], [A, 0]].

    Returns (solution, used_fallback).  Falls back to a minimum-norm
    least-squares solve when the system is singular or the direct
    factorization is inaccurate.
    """
    dim = h.shape[0]
    m = a_rows.shape[0]
    kkt = np.zeros((dim + m, dim + m))
    kkt[:dim, :dim] = h
    if m:
        kkt[dim:, :dim] = a_rows
        kkt[:dim, dim:] = a_rows.T
    if not force_lstsq:
        try:
            z = scipy.linalg.solve(kkt, rhs, assume_a="sym", check_finite=False)
            resid = float(np.max(np.abs(kkt @ z - rhs)))
            if np.all(np.isfinite(z)) and resid <= 1e-8 * (1.0 + float(np.max(np.abs(rhs)))):
                return z, False
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
            pass
    z, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    return z, True


def _initial_point(qp, tol):
    """Least-norm equality solution, then a phase-1 repair of inequality
    violations.

    Returns ``(x, infeasible_row)``; the row is None when x satisfies all
    constraints within tol, otherwise it indexes the most violated row
    (equality rows first) as an infeasibility certificate.
    """
    dim = qp.dim
    a_eq, b_eq = qp.a_eq, qp.b_eq
    a, b = qp.a_ineq, qp.b_ineq
    if a_eq.shape[0]:
        x, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
        eq_resid = np.abs(a_eq @ x - b_eq)
        worst = int(np.argmax(eq_resid))
        if eq_resid[worst] > tol * (1.0 + float(np.max(np.abs(b_eq), initial=0.0))):
            return x, worst
    else:
        x = np.zeros(dim)

    if a.shape[0] == 0 or float(np.max(a @ x - b)) <= tol:
        return x, None

    # Phase 1: elastic LP minimizing total inequality violation.
    m = a.shape[0]
    c = np.concatenate([np.zeros(dim), np.ones(m)])
    a_ub = np.block([[a, -np.eye(m)], [np.zeros((m, dim)), -np.eye(m)]])
    b_ub = np.concatenate([b, np.zeros(m)])
    lp_kwargs = dict(
        c=c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * (dim + m),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if a_eq.shape[0]:
        lp_kwargs["A_eq"] = np.hstack([a_eq, np.zeros((a_eq.shape[0], m))])
        lp_kwargs["b_eq"] = b_eq
    lp = linprog(**lp_kwargs)
    if not lp.success:
        worst = int(np.argmax(a @ x - b))
        return x, a_eq.shape[0] + worst
    x = lp.x[:dim]

    # Polish: least-norm corrections onto the still-violated rows, keeping
    # the equalities exact.
    for _ in range(50):
        violation = a @ x - b
        if float(np.max(violation)) <= 1e-12 * (1.0 + float(np.max(np.abs(b)))):
            break
        active = np.where(violation > 0.0)[0]
        stacked = np.vstack([a_eq, a[active]]) if a_eq.shape[0] else a[active]
        target = np.concatenate(
            [np.zeros(a_eq.shape[0]), -violation[active]]
        ) if a_eq.shape[0] else -violation[active]
        d, *_ = np.linalg.lstsq(stacked, target, rcond=None)
        x = x + d

    violation = a @ x - b
    worst = int(np.argmax(violation))
    if violation[worst] > tol:
        return x, a_eq.shape[0] + worst
    return x, None


def solve_qp(qp: QuadraticProgram, tol: float = DEFAULT_TOL, max_iter: int | None = None) -> QpSolution:
    """Solve a strictly convex QP with a primal active-set method.

    Parameters
    ----------
    qp : QuadraticProgram
        Problem data.  ``h`` must be positive definite on the null space
        of the equality constraints; rank-deficient problems take the
        degenerate path below instead of failing.
    tol : float
        Feasibility and stationarity tolerance for the ``optimal`` status.
    max_iter : int, optional
        Active-set iteration cap; defaults to ``50 * (dim + n_ineq)``.

    Returns
    -------
    QpSolution
        With ``status`` one of ``optimal``, ``degenerate``,
        ``max_iterations``, or ``infeasible``; infeasible solutions carry
        the most violated row in ``infeasible_row`` (equality rows first)
        as a certificate.

    Notes
    -----
    When the reduced Hessian has an eigenvalue below 1e-10 the problem is
    flagged ``degenerate``: inequality-constrained problems get a diagonal
    shift of ``1e-10 * trace(h) / dim`` to restore strict convexity, while
    equality-only problems are solved exactly through a minimum-norm KKT
    solve (no shift, so least-squares fits on rank-deficient designs stay
    unbiased).  Ties in the ratio test and in multiplier dropping resolve
    to the lowest row index, so solves are deterministic.
    """
    folded = _fold_bounds(qp)
    dim = folded.dim
    h, f = folded.h, folded.f
    a_eq, b_eq = folded.a_eq, folded.b_eq
    a, b = folded.a_ineq, folded.b_ineq
    me, mp = a_eq.shape[0], a.shape[0]
    if max_iter is None:
        max_iter = 50 * (dim + mp)
    if tol <= 0.0:
        raise InvalidInputError("tol must be positive")

    # Positive-definiteness of H on the null space of the equalities.
    degenerate = False
    force_lstsq = False
    h_work = h
    if me:
        _, s, vt = np.linalg.svd(a_eq)
        rank = int(np.sum(s > s[0] * max(a_eq.shape) * np.finfo(float).eps)) if s.size else 0
        z = vt[rank:].T
    else:
        z = np.eye(dim)
    if z.shape[1] > 0:
        reduced = z.T @ h @ z
        min_eig = float(np.min(np.linalg.eigvalsh((reduced + reduced.T) / 2.0)))
        if min_eig < _PD_MARGIN:
            degenerate = True
            if mp:
                shift = _PD_MARGIN * float(np.trace(h)) / dim
                h_work = h + shift * np.eye(dim)
            else:
                force_lstsq = True

    x, bad_row = _initial_point(folded, tol)
    if bad_row is not None:
        nu = np.zeros(me)
        mu = np.zeros(mp)
        return QpSolution(
            beta=x,
            status=INFEASIBLE,
            eq_multipliers=nu,
            ineq_multipliers=mu,
            kkt_residual=max(_kkt_terms(folded, x, nu, mu)),
            iterations=0,
            infeasible_row=bad_row,
        )

    working: list[int] = []
    nu = np.zeros(me)
    mu = np.zeros(mp)
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        rows = np.vstack([a_eq, a[working]]) if working else a_eq
        rhs = np.concatenate([-f, b_eq, b[working]])
        z_sol, _ = _solve_kkt(h_work, rows, rhs, force_lstsq=force_lstsq)
        x_new = z_sol[:dim]
        nu = z_sol[dim : dim + me]
        mu_working = z_sol[dim + me :]

        step = x_new - x
        if float(np.max(np.abs(step), initial=0.0)) <= tol * (1.0 + float(np.max(np.abs(x), initial=0.0))):
            # Stationary on the current working set; check multiplier signs.
            if working and mu_working.size and float(np.min(mu_working)) < _MULTIPLIER_FLOOR:
                candidates = np.where(mu_working == np.min(mu_working))[0]
                drop = min(candidates, key=lambda i: working[i])
                del working[drop]
                continue
            x = x_new
            mu = np.zeros(mp)
            for slot, row in enumerate(working):
                mu[row] = mu_working[slot]
            converged = True
            break

        # Ratio test: largest feasible step toward x_new.
        alpha = 1.0
        blocker = None
        if mp:
            a_step = a @ step
            slack = b - a @ x
            denom_floor = 1e-13 * max(1.0, float(np.max(np.abs(a_step))))
            for row in range(mp):
                if row in working or a_step[row] <= denom_floor:
                    continue
                ratio = max(slack[row], 0.0) / a_step[row]
                if ratio < alpha - 1e-15:
                    alpha = ratio
                    blocker = row
        x = x + alpha * step
        if blocker is not None:
            working.append(blocker)
            working.sort()

    if not converged:
        mu = np.zeros(mp)
        for slot, row in enumerate(working):
            if slot < mu_working.size:
                mu[row] = mu_working[slot]
        residual = max(_kkt_terms(folded, x, nu, mu))
        return QpSolution(
            beta=x,
            status=MAX_ITERATIONS,
            eq_multipliers=nu,
            ineq_multipliers=mu,
            kkt_residual=residual,
            iterations=iterations,
        )

    residual = max(_kkt_terms(folded, x, nu, mu))
    if degenerate:
        status = DEGENERATE
    elif residual <= tol:
        status = OPTIMAL
    else:
        status = DEGENERATE
    return QpSolution(
        beta=x,
        status=status,
        eq_multipliers=nu,
        ineq_multipliers=mu,
        kkt_residual=residual,
        iterations=iterations,
    )
