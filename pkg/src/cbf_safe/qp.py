"""Dense strictly convex QP solver with verifiable optimality certificates.

Problems here are tiny (two or three decision variables, a handful of
inequality rows plus box bounds), so the solver favors exactness and
determinism over scale: a primal active-set iteration started from a
feasible point found by Fourier-Motzkin variable elimination. The
elimination doubles as the infeasibility certificate: when the reduced
one-dimensional interval is empty, the participating original constraints
are reported.

Constraint indexing is stacked: rows first (0..R-1), then lower box bounds
(R..R+d-1), then upper box bounds (R+d..R+2d-1). active_set, multipliers and
certificates all use this indexing; infinite box entries are simply skipped
(they can never be active).

Identical problems yield bit-identical solutions: every loop is ordered and
all tie-breaks pick the lowest index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ConfigurationError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"

_FEAS_TOL = 1e-8      # phase-1 infeasibility threshold
_PRIMAL_TOL = 1e-9    # constraint satisfaction at reported solutions
_DUAL_TOL = 1e-10     # multiplier nonnegativity slack


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 y'Hy + c'y over inequality rows and box bounds.

    The decision vector is (u_1..u_q, delta). H must be symmetric positive
    definite (costs are ||u||^2 + p*delta^2 shapes, strictly convex). Box
    entries may be infinite (the slack is unbounded).
    """

    hessian: np.ndarray
    linear: np.ndarray
    rows: tuple
    box_lower: np.ndarray
    box_upper: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.hessian, dtype=float)
        c = np.atleast_1d(np.asarray(self.linear, dtype=float))
        lo = np.atleast_1d(np.asarray(self.box_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.box_upper, dtype=float))
        object.__setattr__(self, "hessian", H)
        object.__setattr__(self, "linear", c)
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "box_lower", lo)
        object.__setattr__(self, "box_upper", hi)
        d = c.size
        if H.shape != (d, d):
            raise ConfigurationError(f"hessian shape {H.shape} != ({d},{d})")
        scale = max(1.0, float(np.abs(H).max()))
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12 * scale):
            raise ConfigurationError("hessian must be symmetric")
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError:
            raise ConfigurationError("hessian must be positive definite")
        if lo.shape != (d,) or hi.shape != (d,):
            raise ConfigurationError("box bounds must match the dimension")
        if np.any(lo > hi):
            raise ConfigurationError("box lower exceeds box upper")
        for row in self.rows:
            if row.coeffs.size != d:
                raise ConfigurationError(
                    f"row has {row.coeffs.size} coefficients, expected {d}"
                )

    @property
    def dim(self) -> int:
        return self.linear.size

    def stacked(self):
        """All constraints as ``G y <= h`` in stacked index order."""
        d = self.dim
        G, h = [], []
        for row in self.rows:
            a, b = row.as_leq()
            G.append(a)
            h.append(b)
        for i in range(d):  # lower bounds: -y_i <= -lo_i
            e = np.zeros(d)
            e[i] = -1.0
            G.append(e)
            h.append(-self.box_lower[i])
        for i in range(d):  # upper bounds: y_i <= hi_i
            e = np.zeros(d)
            e[i] = 1.0
            G.append(e)
            h.append(self.box_upper[i])
        return np.array(G), np.array(h)


@dataclass(frozen=True)
class QpSolution:
    """Solver outcome. point/objective/kkt_residual are None unless a point
    was produced; multipliers and active_set use stacked constraint indices;
    certificate names a stacked-index subset with empty intersection when
    the problem is infeasible."""

    status: str
    point: Optional[np.ndarray]
    objective: Optional[float]
    kkt_residual: Optional[float]
    active_set: tuple
    multipliers: Optional[np.ndarray]
    certificate: Optional[tuple] = None


def verify_kkt(problem: QpProblem, point: np.ndarray,
               multipliers: np.ndarray) -> float:
    """Max violation over the four KKT condition groups at (point, lambda).

    Groups: stationarity ||Hy + c + G'lambda||_inf, primal feasibility
    max(0, Gy - h), dual feasibility max(0, -lambda), complementary
    slackness max |lambda_i (Gy - h)_i|. Pure function; usable on any
    candidate point.
    """
    y = np.asarray(point, dtype=float)
    lam = np.asarray(multipliers, dtype=float)
    G, h = problem.stacked()
    if y.shape != (problem.dim,) or lam.shape != (len(G),):
        raise ConfigurationError("point/multiplier dimensions do not match")
    finite = np.isfinite(h)
    slack = G @ y - h
    stat = problem.hessian @ y + problem.linear + G.T @ lam
    r_stat = float(np.abs(stat).max())
    r_prim = float(max(0.0, slack[finite].max())) if finite.any() else 0.0
    r_dual = float(max(0.0, -lam.min())) if lam.size else 0.0
    r_comp = float(np.abs(lam[finite] * slack[finite]).max()) if finite.any() else 0.0
    return max(r_stat, r_prim, r_dual, r_comp)


def _normalize(G, h):
    """Scale each constraint to unit coefficient norm; returns scales too."""
    scales = np.linalg.norm(G, axis=1)
    scales[scales == 0.0] = 1.0
    return G / scales[:, None], h / scales, scales


def _pick_in_interval(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo + 1.0
    if math.isfinite(hi):
        return hi - 1.0
    return 0.0


def _fm_feasible_point(G, h):
    """Feasible point of {y : G y <= h} by variable elimination.

    Variables are eliminated from the last down to the first; layers[i]
    involves variables 0..d-1-i only. Back-substitution then fixes y_0 from
    the fully reduced interval and walks back up. Returns (point, None) when
    the set is nonempty, else (None, certificate) where certificate is the
    tuple of original constraint indices whose one-dimensional reduction is
    empty.
    """
    d = G.shape[1]
    cons = [(G[i].copy(), float(h[i]), frozenset((i,))) for i in range(len(G))]
    layers = [cons]
    for var in range(d - 1, 0, -1):
        pos, neg, keep = [], [], []
        for a, b, s in layers[-1]:
            if a[var] > 1e-12:
                pos.append((a, b, s))
            elif a[var] < -1e-12:
                neg.append((a, b, s))
            else:
                keep.append((a, b, s))
        for ap, bp, sp in pos:
            for an, bn, sn in neg:
                # positive combination cancelling the eliminated variable
                wp, wn = -an[var], ap[var]
                a_new = wp * ap + wn * an
                b_new = wp * bp + wn * bn
                a_new[var] = 0.0
                norm = float(np.linalg.norm(a_new[:var]))
                if norm > 1e-300:
                    a_new, b_new = a_new / norm, b_new / norm
                keep.append((a_new, b_new, sp | sn))
        layers.append(keep)

    point = np.zeros(d)
    for var in range(0, d):
        # layer where `var` is the highest remaining variable; lower
        # variables are already fixed in point[:var]
        lo, hi = -math.inf, math.inf
        lo_sup, hi_sup = frozenset(), frozenset()
        for a, b, s in layers[d - 1 - var]:
            fixed = float(a[:var] @ point[:var]) if var else 0.0
            coef = float(a[var])
            rhs = b - fixed
            if coef > 1e-12:
                v = rhs / coef
                if v < hi:
                    hi, hi_sup = v, s
            elif coef < -1e-12:
                v = rhs / coef
                if v > lo:
                    lo, lo_sup = v, s
            elif rhs < -_FEAS_TOL:
                # row involves only already-fixed variables (or none)
                return None, tuple(sorted(s))
        if lo > hi + _FEAS_TOL:
            return None, tuple(sorted(lo_sup | hi_sup))
        point[var] = _pick_in_interval(lo, hi)
    return point, None


def _eqp(H, c, A, b):
    """Equality-constrained QP: minimize over {y : A y = b}.

    Returns (point, multipliers) from the KKT block system.
    """
    d = c.size
    k = len(A)
    if k == 0:
        return np.linalg.solve(H, -c), np.zeros(0)
    kkt = np.zeros((d + k, d + k))
    kkt[:d, :d] = H
    kkt[:d, d:] = A.T
    kkt[d:, :d] = A
    rhs = np.concatenate([-c, b])
    sol = np.linalg.solve(kkt, rhs)
    return sol[:d], sol[d:]


def solve(problem: QpProblem, max_iter: int = 1000) -> QpSolution:
    """Primal active-set solve of a strictly convex dense QP.

    Rows are scaled to unit coefficient norm internally; the solution and
    multipliers are reported in the original scaling. On success the KKT
    residual at the returned point is below 1e-8 and every constraint holds
    within 1e-9. Infeasible problems come back with a certificate subset.
    """
    G_orig, h_orig = problem.stacked()
    finite = np.isfinite(h_orig)
    idx_map = np.flatnonzero(finite)          # stacked indices in play
    G_n, h_n, scales = _normalize(G_orig[finite], h_orig[finite])
    m = len(G_n)

    def finish(y, working, lam_n, status):
        lam = np.zeros(len(G_orig))
        for w, lv in zip(working, lam_n):
            lam[idx_map[w]] = max(float(lv), 0.0) / scales[w]
        obj = float(0.5 * y @ problem.hessian @ y + problem.linear @ y)
        resid = verify_kkt(problem, y, lam)
        active = tuple(int(idx_map[w]) for w in sorted(working))
        return QpSolution(status=status, point=y, objective=obj,
                          kkt_residual=resid, active_set=active,
                          multipliers=lam)

    # fast path: unconstrained minimizer already feasible
    y_free = np.linalg.solve(problem.hessian, -problem.linear)
    if m == 0 or np.all(G_n @ y_free <= h_n + _PRIMAL_TOL):
        return finish(y_free, [], [], OPTIMAL)

    y0, certificate = _fm_feasible_point(G_n, h_n)
    if y0 is None:
        cert = tuple(int(idx_map[i]) for i in certificate)
        return QpSolution(status=INFEASIBLE, point=None, objective=None,
                          kkt_residual=None, active_set=(),
                          multipliers=None, certificate=cert)

    y = y0
    working: list = []
    for _ in range(max_iter):
        try:
            y_eq, lam_n = _eqp(problem.hessian, problem.linear,
                               G_n[working], h_n[working])
        except np.linalg.LinAlgError:
            # numerically dependent working set (degenerate geometry);
            # report the current iterate rather than crash
            return finish(y, [], np.zeros(0), MAX_ITERATIONS)
        step = y_eq - y
        if float(np.abs(step).max()) <= 1e-11 * (1.0 + float(np.abs(y).max())):
            if len(lam_n) == 0 or float(lam_n.min()) >= -_DUAL_TOL:
                return finish(y_eq, working, lam_n, OPTIMAL)
            working.pop(int(np.argmin(lam_n)))
            continue
        alpha = 1.0
        blocker = -1
        for i in range(m):
            if i in working:
                continue
            advance = float(G_n[i] @ step)
            if advance > 1e-13:
                room = (h_n[i] - float(G_n[i] @ y)) / advance
                if room < alpha - 1e-14:
                    alpha = room
                    blocker = i
        alpha = max(alpha, 0.0)
        y = y + alpha * step
        if blocker >= 0:
            working.append(blocker)
    y_eq, lam_n = _eqp(problem.hessian, problem.linear,
                       G_n[working], h_n[working])
    return finish(y, working, lam_n, MAX_ITERATIONS)


def without_box(problem: QpProblem) -> QpProblem:
    """Copy of the problem with the box removed (rows kept)."""
    d = problem.dim
    return QpProblem(hessian=problem.hessian, linear=problem.linear,
                     rows=problem.rows,
                     box_lower=np.full(d, -np.inf),
                     box_upper=np.full(d, np.inf))
