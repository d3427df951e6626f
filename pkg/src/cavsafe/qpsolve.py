"""Dense convex QP with diagonal Hessian, solved by a primal active-set method.

Problem::

    minimize    sum_j w_j x_j^2 + c_j x_j + const
    subject to  constraint rows (LinearConstraint), lower <= x <= upper

Phase 1 finds a feasible point by minimising the largest violation (an LP
solved with the same active-set core); phase 2 then runs the primal method
from that point. Rows are normalised to unit length first, so scaling a row
does not change the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyFeasibleGrid, NumericalBreakdown

_FEAS_TOL = 1e-10
_STEP_TOL = 1e-13


@dataclass
class QuadraticProgram:
    weights: np.ndarray
    linear: np.ndarray
    constraints: list = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    constant: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.linear = np.asarray(self.linear, dtype=float)
        n = self.weights.size
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if self.linear.shape != (n,) or self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("weights, linear, lower and upper must share one length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        for j in range(n):
            if self.weights[j] == 0 and not (np.isfinite(self.lower[j]) and np.isfinite(self.upper[j])):
                raise ValueError(f"variable {j} has zero weight and is not boxed")
        for con in self.constraints:
            if len(con.coeffs) != n:
                raise ValueError(f"{con.tag} row has {len(con.coeffs)} coefficients, expected {n}")

    @property
    def n(self):
        return self.weights.size

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.sum(self.weights * x * x) + self.linear @ x + self.constant)

    def inequality_rows(self):
        """All rows (constraints then finite bounds) as ``A x <= b``, plus origin labels."""
        rows, rhs, labels = [], [], []
        for con in self.constraints:
            a, b = con.as_leq()
            rows.append(a)
            rhs.append(b)
            labels.append(con.tag)
        eye = np.eye(self.n)
        for j in range(self.n):
            if np.isfinite(self.upper[j]):
                rows.append(eye[j])
                rhs.append(self.upper[j])
                labels.append(f"upper[{j}]")
            if np.isfinite(self.lower[j]):
                rows.append(-eye[j])
                rhs.append(-self.lower[j])
                labels.append(f"lower[{j}]")
        A = np.array(rows, dtype=float).reshape(len(rows), self.n)
        return A, np.array(rhs, dtype=float), labels


@dataclass
class QPSolution:
    x: np.ndarray | None
    objective: float
    status: str  # "Optimal" | "Infeasible"
    multipliers: np.ndarray | None = None  # for the rows of inequality_rows(), >= 0
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == "Optimal"


def _normalize(A, b):
    norms = np.linalg.norm(A, axis=1)
    keep = norms > 0
    scale = np.where(keep, norms, 1.0)
    return A / scale[:, None], b / scale, keep, scale


def _null_space(Aw, n):
    if Aw.shape[0] == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(Aw.T, mode="complete")
    return q[:, Aw.shape[0]:]


def _active_set(h, c, A, b, x, max_iter):
    """Primal active-set iterations from a feasible ``x`` for ``min 1/2 x'Hx + c'x``.

    ``h`` is the Hessian diagonal (PSD). Returns (x, working set, multipliers, iters).
    """
    n = x.size
    m = A.shape[0]
    work = []
    hmax = max(float(np.max(h)) if n else 0.0, 1.0)
    for it in range(max_iter):
        g = h * x + c
        Z = _null_space(A[work], n)
        p = np.zeros(n)
        ray = False
        if Z.shape[1]:
            Hz = (Z.T * h) @ Z
            gz = Z.T @ g
            lam, V = np.linalg.eigh(Hz)
            flat = lam <= 1e-12 * hmax
            gv = V.T @ gz
            if np.any(flat & (np.abs(gv) > 1e-12 * max(1.0, np.linalg.norm(g)))):
                p = -Z @ (V[:, flat] @ gv[flat])
                ray = True
            else:
                curved = ~flat
                p = -Z @ (V[:, curved] @ (gv[curved] / lam[curved]))
        if np.linalg.norm(p) <= _STEP_TOL * max(1.0, np.linalg.norm(x)):
            if not work:
                return x, work, np.zeros(0), it
            Aw = A[work]
            mult, *_ = np.linalg.lstsq(Aw.T, -g, rcond=None)
            neg = [k for k in range(len(work)) if mult[k] < -1e-11 * max(1.0, np.linalg.norm(g))]
            if not neg:
                return x, work, mult, it
            drop = min(neg, key=lambda k: (mult[k], work[k]))
            work.pop(drop)
            continue
        Ap = A @ p
        alpha = np.inf if ray else 1.0
        block = None
        if m:
            eligible = Ap > 1e-14
            eligible[work] = False
            steps = np.full(m, np.inf)
            steps[eligible] = np.maximum((b[eligible] - A[eligible] @ x) / Ap[eligible], 0.0)
            cand = steps < alpha
            if cand.any():
                alpha = float(steps[cand].min())
                block = int(np.flatnonzero(cand & (steps == alpha))[0])
        if not np.isfinite(alpha):
            raise NumericalBreakdown("QP objective is unbounded below")
        x = x + alpha * p
        if block is not None:
            work.append(block)
    raise NumericalBreakdown("active-set iteration limit reached")


def _phase_one(A, b, x0):
    """Minimise the largest violation t subject to A x - t <= b, t >= 0."""
    n = x0.size
    m = A.shape[0]
    A1 = np.zeros((m + 1, n + 1))
    A1[:m, :n] = A
    A1[:m, n] = -1.0
    A1[m, n] = -1.0
    b1 = np.append(b, 0.0)
    t0 = max(0.0, float(np.max(A @ x0 - b))) if m else 0.0
    z0 = np.append(x0, t0)
    c1 = np.zeros(n + 1)
    c1[n] = 1.0
    z, *_ = _active_set(np.zeros(n + 1), c1, A1, b1, z0, max_iter=50 * (n + m + 2))
    return z[:n], z[n]


def solve(qp, x0=None):
    """Global minimiser of a convex QP, or status "Infeasible"."""
    A_raw, b_raw, _ = qp.inequality_rows()
    A, b, keep, scale = _normalize(A_raw, b_raw)
    if np.any(~keep & (b_raw < -_FEAS_TOL)):
        return QPSolution(None, math.nan, "Infeasible")
    A, b_k = A[keep], b[keep]
    n = qp.n
    if np.max(np.abs(qp.weights), initial=0.0) > 0:
        wpos = qp.weights[qp.weights > 0]
        if wpos.max() / wpos.min() > 1e12:
            raise NumericalBreakdown("Hessian conditioning beyond 1e12")
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if A.shape[0] and np.max(A @ x - b_k) > _FEAS_TOL:
        x, viol = _phase_one(A, b_k, x)
        if viol > 1e-9:
            return QPSolution(None, math.nan, "Infeasible")
    h = 2.0 * qp.weights
    x, work, mult, iters = _active_set(h, qp.linear, A, b_k, x, max_iter=50 * (n + A.shape[0] + 2))
    full = np.zeros(A.shape[0])
    for k, i in enumerate(work):
        full[i] = max(mult[k], 0.0)
    multipliers = np.zeros(A_raw.shape[0])
    multipliers[np.flatnonzero(keep)] = full / scale[keep]
    return QPSolution(x, qp.objective(x), "Optimal", multipliers, iters)


def kkt_residuals(qp, sol):
    """(stationarity, complementarity, max violation) of an optimal solution."""
    A, b, _ = qp.inequality_rows()
    x, lam = sol.x, sol.multipliers
    grad = 2.0 * qp.weights * x + qp.linear
    stationarity = float(np.max(np.abs(grad + A.T @ lam), initial=0.0))
    slack = b - A @ x
    complementarity = float(np.max(np.abs(lam * slack), initial=0.0))
    violation = float(np.max(-slack, initial=0.0))
    return stationarity, complementarity, max(violation, 0.0)


@dataclass
class OracleResult:
    x: np.ndarray
    objective: float


def brute_force_oracle(qp, resolution, slack_cap=1e3, chunk=1_000_000):
    """Best feasible point of a uniform grid over the box (testing oracle).

    Infinite bounds are replaced by ``+-slack_cap``; ``resolution`` is the grid
    spacing per axis. Works for n <= 4.
    """
    n = qp.n
    if n > 4:
        raise ValueError("oracle limited to n <= 4")
    lo = np.where(np.isfinite(qp.lower), qp.lower, -slack_cap)
    hi = np.where(np.isfinite(qp.upper), qp.upper, slack_cap)
    axes = []
    for j in range(n):
        count = int(round((hi[j] - lo[j]) / resolution)) + 1 if hi[j] > lo[j] else 1
        axes.append(np.linspace(lo[j], hi[j], max(count, 1)))
    A, b, _ = qp.inequality_rows()
    best_val, best_x = np.inf, None
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(start + chunk, total)), sizes)
        pts = np.stack([axes[j][idx[j]] for j in range(n)], axis=1)
        ok = np.all(pts @ A.T <= b + 1e-12, axis=1) if A.shape[0] else np.ones(len(pts), bool)
        if not ok.any():
            continue
        pts = pts[ok]
        vals = np.sum(qp.weights * pts * pts, axis=1) + pts @ qp.linear + qp.constant
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_x = float(vals[k]), pts[k]
    if best_x is None:
        raise EmptyFeasibleGrid("no grid point satisfies the constraints")
    return OracleResult(best_x, best_val)


def grid_error_bound(qp, resolution, slack_cap=1e3):
    """Worst objective change over one grid-cell diagonal anywhere in the box.

    A full diagonal, not half: when the optimum sits on a constraint the
    nearest feasible grid point can lie a whole cell away on one side.
    """
    lo = np.where(np.isfinite(qp.lower), qp.lower, -slack_cap)
    hi = np.where(np.isfinite(qp.upper), qp.upper, slack_cap)
    reach = np.maximum(np.abs(lo), np.abs(hi))
    grad = 2.0 * qp.weights * reach + np.abs(qp.linear)
    reach_cell = resolution * math.sqrt(qp.n)
    return float(np.linalg.norm(grad) * reach_cell + np.sum(qp.weights) * reach_cell ** 2)

