"""Brute-force QP oracle: enumerate every candidate active subset.

Independent of the solver's iteration: builds its own constraint stack,
solves the equality-restricted problem on each subset of up to dim
constraints via the textbook block system, keeps KKT-consistent candidates,
and calls the problem infeasible when no candidate point satisfies all
constraints. Generated problems must have a finite box so the feasible set,
when nonempty, has a vertex the enumeration can find.
"""

from itertools import combinations

import numpy as np

from cbf_safe.core import ConstraintRow
from cbf_safe.qp import QpProblem


def stack(problem):
    """Constraints as G y <= h (rows, then finite box entries)."""
    d = problem.dim
    G, h = [], []
    for row in problem.rows:
        if row.sense == "<=":
            G.append(np.asarray(row.coeffs, dtype=float))
            h.append(float(row.bound))
        else:
            G.append(-np.asarray(row.coeffs, dtype=float))
            h.append(-float(row.bound))
    for i in range(d):
        if np.isfinite(problem.box_lower[i]):
            e = np.zeros(d)
            e[i] = -1.0
            G.append(e)
            h.append(-float(problem.box_lower[i]))
        if np.isfinite(problem.box_upper[i]):
            e = np.zeros(d)
            e[i] = 1.0
            G.append(e)
            h.append(float(problem.box_upper[i]))
    return np.array(G).reshape(len(G), d), np.array(h)


def brute_force(problem, tol=1e-9):
    """Returns (status, point, objective) by exhaustive subset search."""
    H = problem.hessian
    c = problem.linear
    d = problem.dim
    G, h = stack(problem)
    m = len(G)
    best = None
    feasible_seen = False
    for size in range(0, d + 1):
        for subset in combinations(range(m), size):
            A = G[list(subset)]
            if size and np.linalg.matrix_rank(A, tol=1e-10) < size:
                continue
            kkt = np.zeros((d + size, d + size))
            kkt[:d, :d] = H
            if size:
                kkt[:d, d:] = A.T
                kkt[d:, :d] = A
            rhs = np.concatenate([-c, h[list(subset)]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            y, lam = sol[:d], sol[d:]
            if not np.all(G @ y <= h + tol):
                continue
            feasible_seen = True
            if size and float(lam.min()) < -tol:
                continue
            obj = float(0.5 * y @ H @ y + c @ y)
            if best is None or obj < best[0]:
                best = (obj, y)
    if best is None:
        return ("infeasible", None, None) if not feasible_seen else \
            ("optimal", None, None)
    return "optimal", best[1], best[0]


def random_problem(rng):
    """Small random QP with a finite box; roughly a third are infeasible."""
    d = int(rng.integers(1, 4))
    A = rng.normal(size=(d, d))
    H = A @ A.T + (0.5 + rng.uniform()) * np.eye(d)
    c = rng.normal(size=d) * float(rng.choice([0.1, 1.0, 10.0]))
    rows = []
    n_rows = int(rng.integers(0, 5))  # leaves room for the forced pair below
    for _ in range(n_rows):
        coeffs = rng.normal(size=d)
        sense = ">=" if rng.uniform() < 0.5 else "<="
        rows.append(ConstraintRow(coeffs, float(rng.normal() * 2.0), sense,
                                  "test"))
    lo = -rng.uniform(0.2, 4.0, size=d)
    hi = rng.uniform(0.2, 4.0, size=d)
    if rng.uniform() < 0.15 and d >= 1:
        # deliberately contradictory pair on the first variable
        e = np.zeros(d)
        e[0] = 1.0
        gap = float(rng.uniform(0.1, 1.0))
        rows.append(ConstraintRow(e, 1.0, ">=", "test"))
        rows.append(ConstraintRow(e, 1.0 - gap, "<=", "test"))
    return QpProblem(hessian=H, linear=c, rows=tuple(rows),
                     box_lower=lo, box_upper=hi)
