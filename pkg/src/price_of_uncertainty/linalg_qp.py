"""Dense KKT solves and an active-set method for box-constrained QPs.

All problems here have the form

    min  0.5 p' diag(H) p + h' p
    s.t. sum(p) = -balance_rhs
         lower <= p <= upper

which is the DC-OPF with one power balance and generation limits.  Stationarity
is written ``H p + h + lam * 1 + mu_upper - mu_lower = 0`` so that the balance
multiplier matches the bordered system ``[H 1; 1' 0] [p; lam] = -[h; balance]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleProblem, SingularMatrix

PIVOT_RTOL = 1e-12
KKT_TOL = 1e-10
UPPER, LOWER = "upper", "lower"


def solve_linear(a, b) -> np.ndarray:
    """Gaussian elimination with partial pivoting.

    Raises SingularMatrix when a pivot drops below ``1e-12`` times the
    largest magnitude entry of the input matrix.
    """
    a = np.array(a, dtype=float)
    x = np.array(b, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if x.shape[0] != n:
        raise ValueError("right-hand side length does not match matrix")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(x))):
        raise ValueError("non-finite entries in linear system")
    scale = np.max(np.abs(a)) if n else 0.0
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    threshold = PIVOT_RTOL * scale
    for k in range(n):
        piv = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[piv, k]) < threshold:
            raise SingularMatrix(f"pivot {abs(a[piv, k]):.3e} below {threshold:.3e} at column {k}")
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(factors, a[k, k:])
        x[k + 1:] -= factors[:, None] * x[k] if x.ndim == 2 else factors * x[k]
    for k in range(n - 1, -1, -1):
        x[k] = (x[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


@dataclass(frozen=True)
class QpProblem:
    h_diag: np.ndarray
    h_lin: np.ndarray
    balance_rhs: float
    lower: np.ndarray = None
    upper: np.ndarray = None

    def __post_init__(self):
        h_diag = np.asarray(self.h_diag, dtype=float)
        n = h_diag.size
        h_lin = np.asarray(self.h_lin, dtype=float)
        lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if not (h_lin.size == lower.size == upper.size == n):
            raise ValueError("QpProblem fields must all have the same length")
        if np.any(h_diag <= 0) or not np.all(np.isfinite(h_diag)):
            raise ValueError("quadratic cost coefficients must be finite and positive")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "h_diag", h_diag)
        object.__setattr__(self, "h_lin", h_lin)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "balance_rhs", float(self.balance_rhs))

    @property
    def n(self) -> int:
        return self.h_diag.size

    def objective(self, p) -> float:
        p = np.asarray(p, dtype=float)
        return float(0.5 * p @ (self.h_diag * p) + self.h_lin @ p)

    def without_bounds(self) -> "QpProblem":
        return QpProblem(self.h_diag, self.h_lin, self.balance_rhs)

    def with_rhs(self, balance_rhs: float) -> "QpProblem":
        return QpProblem(self.h_diag, self.h_lin, balance_rhs, self.lower, self.upper)


@dataclass(frozen=True)
class QpSolution:
    primal: np.ndarray
    multiplier_balance: float
    multipliers_bounds: np.ndarray
    active_set: frozenset = field(default_factory=frozenset)

    def kkt_residuals(self, q: QpProblem) -> dict:
        """Stationarity, balance, bound and complementarity residuals."""
        p = self.primal
        signed = np.zeros(q.n)
        for i, side in self.active_set:
            signed[i] = self.multipliers_bounds[i] if side == UPPER else -self.multipliers_bounds[i]
        stat = q.h_diag * p + q.h_lin + self.multiplier_balance + signed
        inactive = np.ones(q.n, dtype=bool)
        for i, _ in self.active_set:
            inactive[i] = False
        return {
            "stationarity": float(np.max(np.abs(stat), initial=0.0)),
            "balance": abs(float(p.sum()) + q.balance_rhs),
            "bounds": float(max(np.max(p - q.upper, initial=0.0), np.max(q.lower - p, initial=0.0), 0.0)),
            "dual_sign": float(max(-np.min(self.multipliers_bounds, initial=0.0), 0.0)),
            "complementarity": float(np.max(np.abs(self.multipliers_bounds[inactive]), initial=0.0)),
        }


def _bordered(h_diag):
    n = h_diag.size
    k = np.zeros((n + 1, n + 1))
    k[:n, :n] = np.diag(h_diag)
    k[:n, n] = 1.0
    k[n, :n] = 1.0
    return k


def solve_equality_qp(q: QpProblem) -> QpSolution:
    """Solve the bordered KKT system, ignoring any bounds on ``q``."""
    rhs = -np.concatenate([q.h_lin, [q.balance_rhs]])
    z = solve_linear(_bordered(q.h_diag), rhs)
    return QpSolution(z[:-1], float(z[-1]), np.zeros(q.n), frozenset())


def solve_with_active_set(q: QpProblem, active: dict) -> QpSolution:
    """KKT solve with the variables in ``active`` pinned at their bounds.

    ``active`` maps variable index to ``"upper"`` or ``"lower"``.  Bound
    multipliers are recovered from stationarity and may come out negative;
    the caller decides what to do with them.
    """
    n = q.n
    pinned = np.full(n, np.nan)
    for i, side in active.items():
        pinned[i] = q.upper[i] if side == UPPER else q.lower[i]
    free = [i for i in range(n) if i not in active]
    p = np.where(np.isnan(pinned), 0.0, pinned)
    if free:
        h_f = q.h_diag[free]
        rhs = -np.concatenate([q.h_lin[free], [q.balance_rhs + p[list(active)].sum()]])
        z = solve_linear(_bordered(h_f), rhs)
        p[free] = z[:-1]
        lam = float(z[-1])
    else:
        # every variable pinned: the balance multiplier is any value keeping all
        # bound multipliers nonnegative; pick the midpoint of that interval
        grad = q.h_diag * p + q.h_lin
        hi = min((-grad[i] for i, s in active.items() if s == UPPER), default=np.inf)
        lo = max((-grad[i] for i, s in active.items() if s == LOWER), default=-np.inf)
        if np.isfinite(lo) and np.isfinite(hi):
            lam = 0.5 * (lo + hi)
        elif np.isfinite(hi):
            lam = hi
        elif np.isfinite(lo):
            lam = lo
        else:
            lam = 0.0
    mu = np.zeros(n)
    for i, side in active.items():
        g = q.h_diag[i] * p[i] + q.h_lin[i] + lam
        mu[i] = -g if side == UPPER else g
    return QpSolution(p, lam, mu, frozenset(active.items()))


def solve_box_qp(q: QpProblem, max_iter: int = 200) -> QpSolution:
    """Primal active-set method for the box-constrained DC-OPF QP.

    Starts from the equality-constrained optimum, drops the bound with the
    most negative multiplier, otherwise clamps the most violated bound, and
    repeats until the KKT conditions hold.
    """
    target = -q.balance_rhs
    lo_sum, hi_sum = q.lower.sum(), q.upper.sum()
    slack = KKT_TOL * max(1.0, abs(target))
    if target < lo_sum - slack or target > hi_sum + slack:
        raise InfeasibleProblem(
            f"generation bounds [{lo_sum:g}, {hi_sum:g}] cannot balance demand {q.balance_rhs:g}")
    active: dict[int, str] = {}
    seen = set()
    for _ in range(max_iter):
        key = frozenset(active.items())
        if key in seen:
            raise RuntimeError(f"active-set cycling at {sorted(key)}")
        seen.add(key)
        sol = solve_with_active_set(q, active)
        if len(active) == q.n:
            gap = sol.primal.sum() - target
            if abs(gap) > slack:
                # every variable pinned but the balance is unmet: release the
                # costliest upper (cheapest lower) pin that can move toward it
                grad = q.h_diag * sol.primal + q.h_lin
                side = UPPER if gap > 0 else LOWER
                movable = [i for i, s in active.items() if s == side and q.lower[i] < q.upper[i]]
                pick = max(movable, key=lambda i: grad[i]) if side == UPPER else min(movable, key=lambda i: grad[i])
                del active[pick]
                continue
        if active:
            worst = min(active, key=lambda i: sol.multipliers_bounds[i])
            if sol.multipliers_bounds[worst] < -KKT_TOL * max(1.0, abs(sol.multiplier_balance)):
                del active[worst]
                continue
        p = sol.primal
        tol = KKT_TOL * np.maximum(1.0, np.abs(p))
        # ties at the bound are clamped, so a demand exactly at a switch point
        # reports the bound as active with a zero multiplier
        over = np.where(np.isfinite(q.upper), p - q.upper + tol, -np.inf)
        under = np.where(np.isfinite(q.lower), q.lower - p + tol, -np.inf)
        for i in active:
            over[i] = under[i] = -np.inf
        i_over, i_under = int(np.argmax(over)), int(np.argmax(under))
        if max(over[i_over], under[i_under]) < 0.0:
            return sol
        if over[i_over] >= under[i_under]:
            active[i_over] = UPPER
        else:
            active[i_under] = LOWER
    raise RuntimeError("active-set iteration limit reached")
