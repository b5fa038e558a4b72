"""Dense bounded-variable two-phase primal simplex.

Solves ``min c'x  s.t.  A x = b,  0 <= x <= u`` and returns the optimal
basic solution with the row duals of the final basis. Artificial variables
(one per row) start phase 1; in phase 2 they are pinned to zero.

Set-partition masters are highly degenerate, so Bland's rule is the default
pivot rule; the largest-coefficient rule is available for speed.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional
import logging

import numpy as np

from .constants import DUALITY_TOL, FEAS_TOL, PIVOT_TOL

logger = logging.getLogger(__name__)


class LpError(RuntimeError):
    """Internal LP failure (unbounded direction, iteration cap, primal and dual disagree)."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class PivotRule(Enum):
    BLAND = "bland"
    DANTZIG = "dantzig"


@dataclass(frozen=True)
class DualValues:
    """Row duals of the restricted master: pi per reservation, mu per vehicle."""
    pi: dict[int, float] = field(default_factory=dict)
    mu: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Basis:
    """Structural variables in the basis (by row) and those at their upper bound."""
    basic: tuple[int, ...]
    at_upper: tuple[int, ...]


@dataclass
class LinearProgram:
    """``min c'x, A x = b, lower <= x <= upper`` with lower = 0.

    Rows ``0 .. n_reservation_rows - 1`` are reservation rows, the rest are
    vehicle rows; that split is only used to label duals.
    """
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    upper: np.ndarray
    n_reservation_rows: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def validate(self) -> list[str]:
        """Shape and bound checks. Returns error messages (empty when well-formed)."""
        errors = []
        m, n = self.A.shape
        if self.c.shape != (n,):
            errors.append(f"c has shape {self.c.shape}, expected ({n},)")
        if self.b.shape != (m,):
            errors.append(f"b has shape {self.b.shape}, expected ({m},)")
        if self.upper.shape != (n,):
            errors.append(f"upper has shape {self.upper.shape}, expected ({n},)")
        elif np.any(self.upper < 0):
            errors.append("upper bounds must be >= 0")
        if not 0 <= self.n_reservation_rows <= m:
            errors.append(f"n_reservation_rows={self.n_reservation_rows} out of range")
        return errors


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    dual_objective: float
    y: np.ndarray                  # row duals
    reduced_costs: np.ndarray
    basis: Optional[Basis]
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def duals(self, n_reservation_rows: int) -> DualValues:
        """Split row duals into reservation (pi) and vehicle (mu) maps."""
        R = n_reservation_rows
        return DualValues(
            pi={r: float(self.y[r]) for r in range(R)},
            mu={v: float(self.y[R + v]) for v in range(len(self.y) - R)},
        )


class _Tableau:
    """Working state: T = B^-1 [A | I], basic values and bound status."""

    def __init__(self, A_full: np.ndarray, b: np.ndarray, upper: np.ndarray, basis: np.ndarray,
                 at_upper: np.ndarray, Binv: np.ndarray):
        self.A_full = A_full
        self.b = b
        self.upper = upper
        self.basis = basis
        self.at_upper = at_upper
        self.T = Binv @ A_full
        self.is_basic = np.zeros(A_full.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.xB = np.zeros(len(basis))
        self.refresh_values()
        self.iterations = 0

    @property
    def Binv(self) -> np.ndarray:
        m = self.A_full.shape[0]
        return self.T[:, -m:]

    def refresh_values(self) -> None:
        rhs = self.b - self.A_full[:, self.at_upper] @ self.upper[self.at_upper]
        self.xB = self.Binv @ rhs

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        T[rows] -= np.outer(col[rows], T[r])
        leaving = self.basis[r]
        self.is_basic[leaving] = False
        self.is_basic[j] = True
        self.basis[r] = j

    def x_full(self) -> np.ndarray:
        x = np.where(self.at_upper, self.upper, 0.0)
        x[self.basis] = self.xB
        return x


def _iterate(tab: _Tableau, cost: np.ndarray, allowed: np.ndarray, rule: PivotRule,
             max_iterations: int) -> None:
    """Run primal simplex pivots until no eligible entering variable remains."""
    while True:
        d = cost - cost[tab.basis] @ tab.T
        nonbasic = ~tab.is_basic & allowed
        increase = nonbasic & ~tab.at_upper & (d < -FEAS_TOL)
        decrease = nonbasic & tab.at_upper & (d > FEAS_TOL)
        eligible = np.flatnonzero(increase | decrease)
        if eligible.size == 0:
            return
        if tab.iterations >= max_iterations:
            raise LpError(f"simplex exceeded {max_iterations} iterations")
        tab.iterations += 1

        if rule is PivotRule.BLAND:
            j = int(eligible[0])
        else:
            j = int(eligible[np.argmax(np.abs(d[eligible]))])
        s = 1.0 if increase[j] else -1.0
        col = tab.T[:, j]
        alpha = s * col

        ub_basic = tab.upper[tab.basis]
        ratios = np.full(len(tab.basis), np.inf)
        falling = alpha > PIVOT_TOL
        ratios[falling] = tab.xB[falling] / alpha[falling]
        rising = (alpha < -PIVOT_TOL) & np.isfinite(ub_basic)
        ratios[rising] = (ub_basic[rising] - tab.xB[rising]) / -alpha[rising]
        ratios = np.maximum(ratios, 0.0)
        theta = ratios.min() if ratios.size else np.inf

        if tab.upper[j] <= theta:
            # Bound flip: entering variable crosses to its other bound.
            step = tab.upper[j]
            tab.xB -= s * step * col
            tab.at_upper[j] = not tab.at_upper[j]
            continue
        if not np.isfinite(theta):
            raise LpError(f"unbounded direction on variable {j}")

        ties = np.flatnonzero(ratios <= theta + PIVOT_TOL)
        r = int(ties[np.argmin(tab.basis[ties])])
        leaving = int(tab.basis[r])
        leaves_at_upper = bool(rising[r])

        entering_value = (tab.upper[j] if tab.at_upper[j] else 0.0) + s * theta
        tab.xB -= s * theta * col
        tab.xB[r] = entering_value
        tab.pivot(r, j)
        tab.at_upper[j] = False
        tab.at_upper[leaving] = leaves_at_upper


def _cold_start(A_full: np.ndarray, b: np.ndarray, upper: np.ndarray, n: int, rule: PivotRule,
                max_iterations: int) -> tuple[Optional[_Tableau], int]:
    """Phase 1 from the all-artificial basis. Returns (tableau or None if infeasible, iterations)."""
    m = A_full.shape[0]
    basis = np.arange(n, n + m)
    at_upper = np.zeros(n + m, dtype=bool)
    tab = _Tableau(A_full, b, upper, basis, at_upper, np.eye(m))

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    _iterate(tab, phase1_cost, allowed, rule, max_iterations)
    infeasibility = float(phase1_cost[tab.basis] @ tab.xB)
    if infeasibility > FEAS_TOL * max(1.0, float(np.abs(b).sum())):
        logger.info(f"[LP] Phase 1 ended with infeasibility {infeasibility:.3e}")
        return None, tab.iterations

    # Drive remaining (zero-valued) artificials out of the basis.
    for r in range(m):
        if tab.basis[r] < n:
            continue
        candidates = np.flatnonzero(~tab.is_basic[:n] & (np.abs(tab.T[r, :n]) > PIVOT_TOL))
        if candidates.size == 0:
            logger.debug(f"[LP] Row {r} is redundant; artificial stays basic at zero")
            continue
        j = int(candidates[0])
        value = tab.upper[j] if tab.at_upper[j] else 0.0
        leaving = int(tab.basis[r])
        tab.pivot(r, j)
        tab.xB[r] = value
        tab.at_upper[j] = False
        tab.at_upper[leaving] = False
    return tab, tab.iterations


def _warm_start(A_full: np.ndarray, b: np.ndarray, upper: np.ndarray, n: int,
                warm: Basis) -> Optional[_Tableau]:
    """Rebuild the tableau from a previous structural basis, if still usable."""
    m = A_full.shape[0]
    basic = np.asarray(warm.basic, dtype=np.int64)
    if basic.size != m or np.any(basic >= n) or len(set(warm.basic)) != m:
        return None
    B = A_full[:, basic]
    try:
        Binv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(Binv)):
        return None
    at_upper = np.zeros(n + m, dtype=bool)
    for j in warm.at_upper:
        if j >= n or j in warm.basic:
            return None
        at_upper[j] = True
    tab = _Tableau(A_full, b, upper, basic.copy(), at_upper, Binv)
    ub_basic = upper[basic]
    if np.any(tab.xB < -FEAS_TOL) or np.any(tab.xB > ub_basic + FEAS_TOL):
        return None
    return tab


def solve(lp: LinearProgram, pivot_rule: PivotRule | str = PivotRule.BLAND,
          warm_start: Optional[Basis] = None, max_iterations: Optional[int] = None) -> LpSolution:
    """Solve a bounded LP to optimality.

    Args:
        lp: The program. Every variable must have a finite upper bound.
        pivot_rule: ``bland`` (default, cycling-free) or ``dantzig``.
        warm_start: Basis of a previous solve whose variables keep their
            indices; ignored when it is not primal feasible for ``lp``.
        max_iterations: Pivot cap; defaults to ``100 * (m + n) + 1000``.

    Returns:
        An optimal solution with duals, or an INFEASIBLE status.

    Raises:
        ValueError: If the program is malformed.
        LpError: On an unbounded direction, when the pivot cap is hit, or
            when the primal and dual objectives disagree beyond DUALITY_TOL.
    """
    errors = lp.validate()
    if errors:
        raise ValueError("; ".join(errors))
    rule = PivotRule(pivot_rule)
    m, n = lp.A.shape
    if not np.all(np.isfinite(lp.upper)):
        raise LpError("all variables must be bounded")
    cap = max_iterations if max_iterations is not None else 100 * (m + n) + 1000

    # Phase 1 needs b >= 0; flip rows as necessary (duals flipped back below).
    sign = np.where(lp.b < 0, -1.0, 1.0)
    A = lp.A * sign[:, None]
    b = lp.b * sign
    A_full = np.hstack([A, np.eye(m)])
    upper = np.concatenate([lp.upper.astype(float), np.full(m, np.inf)])

    tab = None
    iterations = 0
    if warm_start is not None:
        upper_fixed = upper.copy()
        upper_fixed[n:] = 0.0
        tab = _warm_start(A_full, b, upper_fixed, n, warm_start)
        if tab is None:
            logger.debug("[LP] Warm start basis unusable, cold start")
    if tab is None:
        tab, iterations = _cold_start(A_full, b, upper, n, rule, cap)
        if tab is None:
            return LpSolution(
                status=LpStatus.INFEASIBLE, x=np.zeros(n), objective=np.inf, dual_objective=np.inf,
                y=np.zeros(m), reduced_costs=np.zeros(n), basis=None, iterations=iterations,
            )

    # Phase 2: artificials pinned to zero and never re-enter.
    tab.upper = upper.copy()
    tab.upper[n:] = 0.0
    cost = np.concatenate([lp.c.astype(float), np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    _iterate(tab, cost, allowed, rule, cap)
    tab.refresh_values()

    x = tab.x_full()[:n]
    y_flipped = cost[tab.basis] @ tab.Binv
    y = y_flipped * sign
    reduced = lp.c - y @ lp.A
    objective = float(lp.c @ x)
    dual_objective = float(lp.b @ y + np.sum(lp.upper * np.minimum(reduced, 0.0)))
    gap = objective - dual_objective
    if not abs(gap) <= DUALITY_TOL * (1.0 + abs(objective)):
        logger.error(f"[LP] Duality gap {gap:.3e} exceeds tolerance")
        raise LpError(f"primal {objective:.9g} and dual {dual_objective:.9g} disagree by {gap:.3e}")

    basis = None
    if np.all(tab.basis < n):
        basis = Basis(basic=tuple(int(j) for j in tab.basis),
                      at_upper=tuple(int(j) for j in np.flatnonzero(tab.at_upper[:n])))
    logger.debug(f"[LP] Optimal objective {objective:.9g} after {tab.iterations} pivots")
    return LpSolution(
        status=LpStatus.OPTIMAL, x=x, objective=objective, dual_objective=dual_objective,
        y=y, reduced_costs=reduced, basis=basis, iterations=tab.iterations,
    )
