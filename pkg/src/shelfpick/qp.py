"""Small dense convex quadratic programs.

Solves  minimize 0.5 x'Hx + g'x  subject to  A x = b,  C x <= d
with a primal active-set method sized for the handful-of-variables problems
this package produces. Reports exact active sets and Lagrange multipliers so
callers can audit KKT residuals.

Note the 0.5 factor in the objective: a caller that wants the plain quadratic
form f'Qf should pass H = 2Q.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

FEAS_TOL = 1e-9          # constraint satisfaction tolerance
DUAL_TOL = 1e-10         # multiplier nonnegativity tolerance
STEP_TOL = 1e-11         # step considered zero below this
MAX_ITERATIONS = 200


class IllConditioned(ValueError):
    """Hessian condition number too large to solve reliably."""


class MissingMultipliers(ValueError):
    """Residual audit needs the multipliers of an Optimal solution."""


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass
class QpProblem:
    """Dense QP data; A/C may have zero rows for unconstrained directions."""

    H: np.ndarray
    g: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    C: np.ndarray | None = None
    d: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.g = np.asarray(self.g, dtype=float).reshape(-1)
        n = self.g.shape[0]
        if self.H.shape != (n, n):
            raise ValueError(f"H must be ({n}, {n}), got {self.H.shape}")
        if self.A is None:
            self.A = np.zeros((0, n))
            self.b = np.zeros(0)
        else:
            self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
            self.b = np.asarray(self.b, dtype=float).reshape(-1)
            if self.A.shape[0] != self.b.shape[0]:
                raise ValueError("A and b row counts differ")
        if self.C is None:
            self.C = np.zeros((0, n))
            self.d = np.zeros(0)
        else:
            self.C = np.asarray(self.C, dtype=float).reshape(-1, n)
            self.d = np.asarray(self.d, dtype=float).reshape(-1)
            if self.C.shape[0] != self.d.shape[0]:
                raise ValueError("C and d row counts differ")

    @property
    def n(self) -> int:
        return self.g.shape[0]


@dataclass
class QpSolution:
    status: QpStatus
    x: np.ndarray | None
    objective: float
    active_set: tuple[int, ...] = ()
    eq_multipliers: np.ndarray | None = None
    ineq_multipliers: np.ndarray | None = None
    iterations: int = 0


def _validated_hessian(problem: QpProblem) -> np.ndarray:
    H = problem.H
    scale = max(1.0, float(np.max(np.abs(H))) if H.size else 1.0)
    if H.size and float(np.max(np.abs(H - H.T))) > 1e-8 * scale:
        raise ValueError("H must be symmetric")
    H = 0.5 * (H + H.T)
    eigs = np.linalg.eigvalsh(H) if H.size else np.zeros(0)
    lam_min = float(eigs[0]) if eigs.size else 0.0
    lam_max = float(eigs[-1]) if eigs.size else 0.0
    if lam_min < -1e-10 * max(1.0, abs(lam_max)):
        raise ValueError(f"H is not positive semidefinite (min eigenvalue {lam_min:.3e})")
    # ridge so degenerate directions (zero weights) stay solvable without
    # wrecking the conditioning bound
    delta = max(1e-12, 2e-12 * lam_max)
    if lam_min < delta:
        H = H + delta * np.eye(problem.n)
        lam_min += delta
        lam_max += delta
    if lam_min > 0 and lam_max / lam_min > 1e12:
        raise IllConditioned(
            f"H condition number {lam_max / lam_min:.3e} exceeds 1e12 after regularization"
        )
    return H


def _objective(problem: QpProblem, x: np.ndarray) -> float:
    return float(0.5 * x @ problem.H @ x + problem.g @ x)


def _tight_set(problem: QpProblem, x: np.ndarray) -> tuple[int, ...]:
    if problem.C.shape[0] == 0:
        return ()
    slack = problem.C @ x - problem.d
    return tuple(int(i) for i in np.nonzero(slack >= -FEAS_TOL)[0])


def _solve_nullity_one(problem: QpProblem, H: np.ndarray) -> QpSolution | None:
    """Closed form when the equalities leave exactly one degree of freedom."""
    A, b, C, d, g = problem.A, problem.b, problem.C, problem.d, problem.g
    n, m = problem.n, A.shape[0]
    if m == 0:
        if n != 1:
            return None
        x_p = np.zeros(1)
        v = np.ones(1)
    else:
        u, sv, vt = np.linalg.svd(A)
        rank = int(np.sum(sv > 1e-11 * max(1.0, sv[0] if sv.size else 0.0)))
        if rank != m or n - rank != 1:
            return None
        x_p = np.linalg.lstsq(A, b, rcond=None)[0]
        if float(np.max(np.abs(A @ x_p - b))) > FEAS_TOL:
            return QpSolution(QpStatus.INFEASIBLE, None, math.inf)
        v = vt[-1]

    a2 = float(v @ H @ v)
    a1 = float(v @ (H @ x_p + g))
    lo, hi = -math.inf, math.inf
    lo_row = hi_row = -1
    if C.shape[0]:
        cv = C @ v
        slack = d - C @ x_p
        for i in range(C.shape[0]):
            if cv[i] > 1e-12:
                bound = slack[i] / cv[i]
                if bound < hi:
                    hi, hi_row = bound, i
            elif cv[i] < -1e-12:
                bound = slack[i] / cv[i]
                if bound > lo:
                    lo, lo_row = bound, i
            elif slack[i] < -FEAS_TOL:
                return QpSolution(QpStatus.INFEASIBLE, None, math.inf)
    if lo > hi + FEAS_TOL:
        return QpSolution(QpStatus.INFEASIBLE, None, math.inf)
    if a2 <= 0.0:
        # regularized H is positive definite, so this cannot happen
        return None
    s = -a1 / a2
    active_row = -1
    if s < lo:
        s, active_row = lo, lo_row
    elif s > hi:
        s, active_row = hi, hi_row
    x = x_p + s * v

    grad = problem.H @ x + g
    cols = [A.T] if m else []
    if active_row >= 0:
        cols.append(C[active_row].reshape(n, 1))
    lam_ineq = np.zeros(C.shape[0])
    if cols:
        M = np.hstack(cols)
        mult = np.linalg.lstsq(M, -grad, rcond=None)[0]
        nu = mult[:m]
        if active_row >= 0:
            lam_ineq[active_row] = max(0.0, float(mult[m]))
    else:
        nu = np.zeros(0)
    return QpSolution(
        QpStatus.OPTIMAL,
        x,
        _objective(problem, x),
        _tight_set(problem, x),
        nu,
        lam_ineq,
        iterations=1,
    )


def _independent_rows(base: np.ndarray, C: np.ndarray, rows: list[int]) -> list[int]:
    """Subset of rows that keeps [base; C[keep]] at full row rank.

    Working sets must stay linearly independent or the KKT solves inside the
    active-set loop go singular and the step no longer keeps tight rows tight.
    """
    stack = base
    rank = int(np.linalg.matrix_rank(stack)) if stack.size else 0
    keep: list[int] = []
    for i in rows:
        trial = np.vstack([stack, C[i : i + 1]])
        trial_rank = int(np.linalg.matrix_rank(trial))
        if trial_rank > rank:
            stack, rank = trial, trial_rank
            keep.append(i)
    return keep


def _active_set_iterate(
    H: np.ndarray,
    g: np.ndarray,
    A: np.ndarray,
    C: np.ndarray,
    d: np.ndarray,
    x: np.ndarray,
    working: list[int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, QpStatus, int]:
    """Core loop from a feasible start; returns (x, nu, lam_full, status, iters)."""
    n, m = x.shape[0], A.shape[0]
    nu = np.zeros(m)
    lam_full = np.zeros(C.shape[0])
    for it in range(1, MAX_ITERATIONS + 1):
        W = sorted(working)
        Cw = C[W] if W else np.zeros((0, n))
        k = m + len(W)
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = H
        rhs = np.zeros(n + k)
        rhs[:n] = -(H @ x + g)
        if m:
            kkt[:n, n:n + m] = A.T
            kkt[n:n + m, :n] = A
        if W:
            kkt[:n, n + m:] = Cw.T
            kkt[n + m:, :n] = Cw
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        p = sol[:n]
        nu = sol[n:n + m]
        lam_w = sol[n + m:]

        if float(np.max(np.abs(p), initial=0.0)) <= STEP_TOL * (1.0 + float(np.max(np.abs(x), initial=0.0))):
            lam_full = np.zeros(C.shape[0])
            if W:
                lam_full[W] = lam_w
            if not W or float(np.min(lam_w)) >= -DUAL_TOL:
                return x, nu, np.maximum(lam_full, 0.0), QpStatus.OPTIMAL, it
            working.remove(W[int(np.argmin(lam_w))])
            continue

        alpha, blocking = 1.0, -1
        if C.shape[0]:
            cp = C @ p
            slack = d - C @ x
            for i in range(C.shape[0]):
                if i in working or cp[i] <= 1e-13:
                    continue
                a_i = slack[i] / cp[i]
                if a_i < alpha - 1e-15:
                    alpha, blocking = a_i, i
        x = x + max(alpha, 0.0) * p
        if blocking >= 0:
            working.append(blocking)
    return x, nu, lam_full, QpStatus.MAX_ITERATIONS, MAX_ITERATIONS


def _phase_one(problem: QpProblem) -> tuple[np.ndarray | None, bool]:
    """Find a feasible start; returns (x0 or None, equalities_consistent)."""
    A, b, C, d = problem.A, problem.b, problem.C, problem.d
    n = problem.n
    if A.shape[0]:
        x0 = np.linalg.lstsq(A, b, rcond=None)[0]
        if float(np.max(np.abs(A @ x0 - b))) > FEAS_TOL:
            return None, False
    else:
        x0 = np.zeros(n)
    if C.shape[0] == 0 or float(np.max(C @ x0 - d)) <= FEAS_TOL:
        return x0, True

    # auxiliary min-slack QP: squeeze the worst violation to zero
    eps = 1e-8
    H_aux = np.diag(np.concatenate([np.full(n, 2.0 * eps), [2.0]]))
    g_aux = np.concatenate([-2.0 * eps * x0, [0.0]])
    A_aux = np.hstack([A, np.zeros((A.shape[0], 1))]) if A.shape[0] else np.zeros((0, n + 1))
    C_aux = np.hstack([C, -np.ones((C.shape[0], 1))])
    s0 = max(0.0, float(np.max(C @ x0 - d)))
    z0 = np.concatenate([x0, [s0]])
    working = _independent_rows(
        A_aux, C_aux, [int(i) for i in np.nonzero(C_aux @ z0 - d >= -FEAS_TOL)[0]]
    )
    z, _, _, _, _ = _active_set_iterate(H_aux, g_aux, A_aux, C_aux, d, z0, working)

    # the eps term biases the slack away from exactly zero, so judge
    # feasibility on the polished point, not on the slack variable
    x = z[:n]
    for _ in range(4):
        viol = C @ x - d if C.shape[0] else np.zeros(0)
        worst = float(np.max(viol, initial=0.0))
        eq_res = float(np.max(np.abs(A @ x - b))) if A.shape[0] else 0.0
        if worst <= FEAS_TOL and eq_res <= FEAS_TOL:
            return x, True
        if worst > 1e-6:
            return None, True
        violated = np.nonzero(viol > 0.0)[0]
        M = np.vstack([A, C[violated]])
        r = np.concatenate([b - A @ x, d[violated] - C[violated] @ x])
        x = x + np.linalg.lstsq(M, r, rcond=None)[0]
    return None, True


def solve_qp(problem: QpProblem) -> QpSolution:
    """Solve the QP; never raises for infeasibility (see QpStatus).

    Optimal solutions carry the equality multipliers, the full-length
    inequality multiplier vector and the indices of tight inequalities.
    """
    H = _validated_hessian(problem)

    fast = _solve_nullity_one(problem, H)
    if fast is not None:
        return fast

    x0, consistent = _phase_one(problem)
    if x0 is None:
        return QpSolution(QpStatus.INFEASIBLE, None, math.inf)

    working = (
        _independent_rows(
            problem.A,
            problem.C,
            [int(i) for i in np.nonzero(problem.C @ x0 - problem.d >= -FEAS_TOL)[0]],
        )
        if problem.C.shape[0]
        else []
    )
    x, nu, lam, status, iters = _active_set_iterate(
        H, problem.g, problem.A, problem.C, problem.d, x0, working
    )
    if status is QpStatus.MAX_ITERATIONS:
        return QpSolution(status, x, _objective(problem, x), _tight_set(problem, x), iterations=iters)
    return QpSolution(
        QpStatus.OPTIMAL,
        x,
        _objective(problem, x),
        _tight_set(problem, x),
        nu,
        lam,
        iterations=iters,
    )


def kkt_residuals(problem: QpProblem, solution: QpSolution) -> dict[str, float]:
    """Stationarity, primal and complementarity residuals of a solution.

    Raises MissingMultipliers when the solution lacks multipliers (only
    Optimal solutions carry them).
    """
    if solution.x is None:
        raise MissingMultipliers("solution has no primal point")
    if solution.eq_multipliers is None or solution.ineq_multipliers is None:
        raise MissingMultipliers("solution has no multipliers to audit")
    x = solution.x
    grad = problem.H @ x + problem.g
    if problem.A.shape[0]:
        grad = grad + problem.A.T @ solution.eq_multipliers
    if problem.C.shape[0]:
        grad = grad + problem.C.T @ solution.ineq_multipliers
    stationarity = float(np.max(np.abs(grad), initial=0.0))

    primal = 0.0
    if problem.A.shape[0]:
        primal = float(np.max(np.abs(problem.A @ x - problem.b)))
    if problem.C.shape[0]:
        primal = max(primal, float(np.max(problem.C @ x - problem.d, initial=0.0)), 0.0)

    complementarity = 0.0
    if problem.C.shape[0]:
        complementarity = float(
            np.max(np.abs(solution.ineq_multipliers * (problem.C @ x - problem.d)), initial=0.0)
        )
    return {
        "stationarity": stationarity,
        "primal": primal,
        "complementarity": complementarity,
    }
