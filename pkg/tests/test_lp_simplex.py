"""
Tests for the bounded two-phase simplex.
"""

import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from evfleet.core.lp_simplex import Basis, LinearProgram, LpError, LpStatus, PivotRule, solve


def random_lp(seed: int, m: int = 3, n: int = 6) -> LinearProgram:
    """Feasible bounded LP with a full-rank constraint matrix."""
    rng = np.random.default_rng(seed)
    while True:
        A = rng.integers(-3, 4, size=(m, n)).astype(float)
        if np.linalg.matrix_rank(A) == m:
            break
    upper = rng.integers(1, 4, size=n).astype(float)
    x0 = rng.uniform(0.0, 1.0, size=n) * upper
    return LinearProgram(c=rng.normal(size=n), A=A, b=A @ x0, upper=upper)


def vertex_minimum(lp: LinearProgram) -> float:
    """Best objective over all basic solutions (each nonbasic at 0 or its bound)."""
    m, n = lp.A.shape
    best = np.inf
    for basic in itertools.combinations(range(n), m):
        B = lp.A[:, basic]
        if abs(np.linalg.det(B)) < 1e-9:
            continue
        nonbasic = [j for j in range(n) if j not in basic]
        for at_upper in itertools.product((False, True), repeat=len(nonbasic)):
            x = np.zeros(n)
            for j, up in zip(nonbasic, at_upper):
                x[j] = lp.upper[j] if up else 0.0
            x[list(basic)] = np.linalg.solve(B, lp.b - lp.A @ x)
            if np.all(x >= -1e-9) and np.all(x <= lp.upper + 1e-9):
                best = min(best, float(lp.c @ x))
    return best


class TestSolve:
    """Tests for optimality against independent references."""

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_vertex_enumeration(self, seed):
        lp = random_lp(seed, m=2, n=5)
        solution = solve(lp)
        assert solution.status is LpStatus.OPTIMAL
        assert solution.objective == pytest.approx(vertex_minimum(lp), abs=1e-7)

    @pytest.mark.parametrize("seed", range(12))
    @pytest.mark.parametrize("rule", ["bland", "dantzig"])
    def test_matches_scipy(self, seed, rule):
        lp = random_lp(100 + seed)
        solution = solve(lp, pivot_rule=rule)
        reference = linprog(lp.c, A_eq=lp.A, b_eq=lp.b, bounds=list(zip(np.zeros(6), lp.upper)),
                            method="highs")
        assert reference.status == 0
        assert solution.objective == pytest.approx(reference.fun, abs=1e-7)

    @pytest.mark.parametrize("seed", range(8))
    def test_primal_feasible_and_dual_certificate(self, seed):
        lp = random_lp(200 + seed)
        solution = solve(lp)
        x, d = solution.x, solution.reduced_costs
        assert np.allclose(lp.A @ x, lp.b, atol=1e-8)
        assert np.all(x >= -1e-9) and np.all(x <= lp.upper + 1e-9)
        # Complementary slackness for bounded variables.
        assert np.all(d[x < 1e-9] >= -1e-7)
        assert np.all(d[x > lp.upper - 1e-9] <= 1e-7)
        assert solution.dual_objective == pytest.approx(solution.objective, abs=1e-7)

    def test_negative_right_hand_side(self):
        lp = LinearProgram(c=np.array([1.0, 2.0]), A=np.array([[-1.0, -1.0]]), b=np.array([-1.5]),
                           upper=np.array([1.0, 1.0]))
        solution = solve(lp)
        assert solution.objective == pytest.approx(2.0)
        assert solution.x == pytest.approx([1.0, 0.5])
        assert solution.y[0] == pytest.approx(-2.0)

    def test_infeasible(self):
        lp = LinearProgram(c=np.ones(2), A=np.array([[1.0, 1.0]]), b=np.array([3.0]), upper=np.ones(2))
        solution = solve(lp)
        assert solution.status is LpStatus.INFEASIBLE
        assert not solution.is_optimal
        assert solution.basis is None

    def test_redundant_row(self):
        A = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        lp = LinearProgram(c=np.array([1.0, 3.0, 1.0]), A=A, b=np.array([1.0, 1.0, 1.0]), upper=np.ones(3))
        solution = solve(lp)
        assert solution.objective == pytest.approx(2.0)

    def test_degenerate_set_partition(self):
        """Every variable at a bound: exercised via bound flips and artificial drive-out."""
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        lp = LinearProgram(c=np.array([2.0, 1.0, 1.4]), A=A, b=np.ones(2), upper=np.ones(3),
                           n_reservation_rows=1)
        solution = solve(lp)
        assert solution.objective == pytest.approx(1.4)
        assert solution.x == pytest.approx([0.0, 0.0, 1.0])
        duals = solution.duals(1)
        assert set(duals.pi) == {0} and set(duals.mu) == {0}
        assert duals.pi[0] + duals.mu[0] == pytest.approx(1.4)


class TestWarmStart:
    """Tests for re-solving after columns are appended."""

    def test_appended_column_same_optimum_as_cold(self):
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        first = solve(LinearProgram(c=np.array([2.0, 1.0, 1.4]), A=A, b=np.ones(2), upper=np.ones(3)))
        A2 = np.hstack([A, [[1.0], [1.0]]])
        lp2 = LinearProgram(c=np.array([2.0, 1.0, 1.4, 0.9]), A=A2, b=np.ones(2), upper=np.ones(4))
        warm = solve(lp2, warm_start=first.basis)
        cold = solve(lp2)
        assert warm.objective == pytest.approx(cold.objective)
        assert warm.objective == pytest.approx(0.9)

    def test_unusable_basis_falls_back(self):
        lp = random_lp(7)
        bad = Basis(basic=(0, 0, 1), at_upper=())
        assert solve(lp, warm_start=bad).objective == pytest.approx(solve(lp).objective)


class TestErrors:
    """Tests for malformed programs and limits."""

    def test_shape_mismatch(self):
        lp = LinearProgram(c=np.ones(3), A=np.ones((1, 2)), b=np.ones(1), upper=np.ones(2))
        with pytest.raises(ValueError):
            solve(lp)

    def test_unbounded_variable_rejected(self):
        lp = LinearProgram(c=-np.ones(2), A=np.array([[1.0, -1.0]]), b=np.zeros(1),
                           upper=np.array([np.inf, np.inf]))
        with pytest.raises(LpError):
            solve(lp)

    def test_iteration_cap(self):
        with pytest.raises(LpError):
            solve(random_lp(3), max_iterations=0)

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            solve(random_lp(3), pivot_rule="steepest")

    def test_rule_enum_accepted(self):
        assert solve(random_lp(4), pivot_rule=PivotRule.DANTZIG).is_optimal

    def test_duality_disagreement_raises(self, monkeypatch):
        assert solve(random_lp(5)).is_optimal
        monkeypatch.setattr("evfleet.core.lp_simplex.DUALITY_TOL", -1.0)
        with pytest.raises(LpError, match="disagree"):
            solve(random_lp(5))
