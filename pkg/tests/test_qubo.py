"""
Tests for the QUBO builder, energy evaluation and the text format.
"""

import itertools

import dimod
import numpy as np
import pytest

from evfleet.core import colgen, qubo
from evfleet.core.colgen import ColumnPool
from evfleet.core.master import solve_exact
from evfleet.core.qubo import QuboFormatError, QuboModel
from evfleet.core.scenario_graph import build_graph
from evfleet.core.status import StatusManager
from evfleet.storage.models import discretize
from conftest import DATA_DIR, make_instance, tiny_instance

# Keeps exhaustive enumeration at 2^15 points or fewer.
DOMINANCE_COLUMNS = 12


def exhaustive(m: QuboModel) -> tuple[np.ndarray, np.ndarray]:
    """All bit vectors (rows, in variable order) and their energies via dimod."""
    sampleset = dimod.ExactSolver().sample(m.to_bqm())
    order = [sampleset.variables.index(i) for i in range(m.n)]
    return sampleset.record.sample[:, order], sampleset.record.energy


def feasible_mask(m: QuboModel, samples: np.ndarray) -> np.ndarray:
    mask = np.ones(len(samples), dtype=bool)
    for row in m.rows:
        total = samples[:, list(row.members)].sum(axis=1)
        mask &= (total == 1) if row.exact else (total <= 1)
    return mask


class TestBuild:
    """Tests for qubo.build()."""

    def test_single_variable(self):
        """One vehicle, no reservations: Q = c - M, offset M."""
        dinst = discretize(make_instance(1, [2.0]))
        model = qubo.build(ColumnPool(build_graph(dinst)), dinst)
        assert model.n == 1
        assert model.penalty_weight == 3.0
        assert model.coefficients == {(0, 0): -2.0}
        assert model.offset == 3.0
        assert qubo.energy(model, [1]) == 1.0
        assert qubo.energy(model, [0]) == 3.0

    def test_reference_coefficients(self, pool_a, dinst_a):
        model = qubo.build(pool_a, dinst_a)
        M = model.penalty_weight
        assert M == pytest.approx(2 * (1.0 + 1.4 + 2.0) + 1)
        assert [v.label().split()[0] for v in model.variables] == ["lambda", "lambda", "y"]
        Q = model.coefficients
        assert set(Q) == {(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)}
        assert Q[(0, 0)] == pytest.approx(1.0 - M)
        assert Q[(1, 1)] == pytest.approx(1.4 - 2 * M)
        assert Q[(2, 2)] == pytest.approx(2.0 - M)
        assert Q[(0, 1)] == pytest.approx(2 * M)
        assert Q[(1, 2)] == pytest.approx(2 * M)
        assert model.offset == pytest.approx(2 * M)

    def test_feasible_energy_is_master_cost(self, pool_a, dinst_a):
        model = qubo.build(pool_a, dinst_a)
        assert qubo.energy(model, [1, 0, 1]) == pytest.approx(3.0)
        assert qubo.energy(model, [0, 1, 0]) == pytest.approx(1.4)
        for x in itertools.product((0, 1), repeat=3):
            objective, penalty = qubo.decompose(model, x)
            assert objective + penalty == pytest.approx(qubo.energy(model, x))
            assert (penalty == 0) == qubo.is_feasible(model, x)

    def test_without_uncovered_variables(self, pool_a, dinst_a):
        model = qubo.build(pool_a, dinst_a, include_uncovered=False)
        M = model.penalty_weight
        assert model.n == len(pool_a)
        assert model.coefficients[(0, 0)] == pytest.approx(1.0 - M)
        assert model.coefficients[(1, 1)] == pytest.approx(-0.6 - M)
        assert model.coefficients[(0, 1)] == pytest.approx(2 * M)
        assert qubo.energy(model, [1, 0]) == pytest.approx(3.0)
        assert qubo.energy(model, [0, 1]) == pytest.approx(1.4)

    @pytest.mark.parametrize("include_uncovered", [True, False])
    def test_solution_bits_energy_is_cost(self, small_pool, small_dinst, include_uncovered):
        model = qubo.build(small_pool, small_dinst, include_uncovered=include_uncovered)
        solution = solve_exact(small_pool, small_dinst)
        bits = qubo.solution_bits(model, solution.columns, solution.uncovered)
        assert qubo.is_feasible(model, bits)
        assert qubo.energy(model, bits) == pytest.approx(solution.cost)

    def test_penalty_override(self, pool_a, dinst_a):
        model = qubo.build(pool_a, dinst_a, penalty_weight=50.0)
        assert model.penalty_weight == 50.0
        assert qubo.energy(model, [0, 1, 0]) == pytest.approx(1.4)
        with pytest.raises(ValueError):
            qubo.build(pool_a, dinst_a, penalty_weight=0.0)

    @pytest.mark.parametrize("include_uncovered", [True, False])
    def test_ground_state_is_master_optimum(self, small_pool, small_dinst, include_uncovered):
        model = qubo.build(small_pool, small_dinst, include_uncovered=include_uncovered)
        samples, energies = exhaustive(model)
        feasible = feasible_mask(model, samples)
        optimum = solve_exact(small_pool, small_dinst).cost
        assert energies.min() == pytest.approx(optimum)
        assert energies[feasible].min() == pytest.approx(optimum)
        # Every infeasible point is strictly worse than every feasible one.
        assert energies[~feasible].min() > energies[feasible].max()

    def test_random_decomposition(self, small_pool, small_dinst):
        model = qubo.build(small_pool, small_dinst)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.integers(0, 2, size=model.n)
            objective, penalty = qubo.decompose(model, x)
            assert penalty >= 0
            assert objective + penalty == pytest.approx(qubo.energy(model, x))

    def test_energy_matches_dimod(self, small_pool, small_dinst):
        model = qubo.build(small_pool, small_dinst)
        bqm = model.to_bqm()
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = rng.integers(0, 2, size=model.n)
            assert qubo.energy(model, x) == pytest.approx(bqm.energy({i: int(b) for i, b in enumerate(x)}))

    def test_local_fields(self, small_pool, small_dinst):
        model = qubo.build(small_pool, small_dinst)
        x = np.zeros(model.n)
        x[[0, 3]] = 1
        fields = model.local_fields(x)
        for i in range(model.n):
            flipped = x.copy()
            flipped[i] = 1 - flipped[i]
            change = qubo.energy(model, flipped.astype(int)) - qubo.energy(model, x.astype(int))
            assert change == pytest.approx(fields[i] if x[i] == 0 else -fields[i])

    def test_bit_vector_checked(self, pool_a, dinst_a):
        model = qubo.build(pool_a, dinst_a)
        with pytest.raises(ValueError):
            qubo.energy(model, [1, 0])
        with pytest.raises(ValueError):
            qubo.energy(model, [2, 0, 0])

    def test_bqm_round_trip(self, small_pool, small_dinst):
        model = qubo.build(small_pool, small_dinst)
        again = QuboModel.from_bqm(model.to_bqm(), model.penalty_weight, model.variables)
        assert again == model


class TestPenaltyDominance:
    """Every infeasible point costs more than every feasible one on generated pools."""

    @pytest.mark.parametrize("include_uncovered", [True, False])
    @pytest.mark.parametrize("seed", range(50))
    def test_generated_pool(self, seed, include_uncovered):
        dinst = discretize(tiny_instance(seed, 2, 3))
        generated = colgen.run(dinst, status=StatusManager()).pool
        pool = ColumnPool(generated.graph)
        pool.extend(itertools.islice(generated, DOMINANCE_COLUMNS))
        model = qubo.build(pool, dinst, include_uncovered=include_uncovered)
        samples, energies = exhaustive(model)
        feasible = feasible_mask(model, samples)
        assert feasible.any() and not feasible.all()
        assert energies[~feasible].min() > energies[feasible].max()
        assert energies.min() == pytest.approx(solve_exact(pool, dinst).cost)


class TestTextFormat:
    """Tests for export() and import_qubo()."""

    def test_golden_single_variable(self):
        dinst = discretize(make_instance(1, [2.0]))
        model = qubo.build(ColumnPool(build_graph(dinst)), dinst)
        assert qubo.export(model) == (DATA_DIR / "qubo_n1.txt").read_bytes()

    def test_golden_five_variables(self):
        raw = (DATA_DIR / "qubo_n5.txt").read_bytes()
        model = qubo.import_qubo(raw)
        assert model.n == 5
        assert model.offset == 10.0
        assert model.penalty_weight == 5.0
        assert model.variables[4].label() == "y 0"
        assert model.variables[2].vehicle == 1
        assert qubo.energy(model, [1, 0, 0, 1, 0]) == 1.0
        assert qubo.energy(model, [0, 1, 1, 0, 0]) == 2.25
        samples, energies = exhaustive(model)
        assert energies.min() == -1.25
        assert samples[np.argmin(energies)].tolist() == [1, 0, 1, 0, 1]
        # Canonical files re-export byte for byte.
        assert qubo.export(model) == raw

    def test_golden_twenty_variables(self):
        """Four vehicles with four columns each, four reservations, M = 59."""
        raw = (DATA_DIR / "qubo_n20.txt").read_bytes()
        model = qubo.import_qubo(raw)
        assert model.n == 20
        assert model.offset == 472.0
        assert model.penalty_weight == 59.0
        assert [v.vehicle for v in model.variables[:16]] == [k // 4 for k in range(16)]
        assert [v.label() for v in model.variables[16:]] == ["y 0", "y 1", "y 2", "y 3"]
        all_trivial = [1 if k in (0, 4, 8, 12) or k >= 16 else 0 for k in range(20)]
        assert qubo.energy(model, all_trivial) == 12.0
        best = [1 if k in (3, 6, 10, 12) else 0 for k in range(20)]
        assert qubo.energy(model, best) == 5.75
        ground = dimod.ExactSolver().sample(model.to_bqm()).first
        assert ground.energy == pytest.approx(5.75)
        assert [ground.sample[i] for i in range(20)] == best
        assert qubo.export(model) == raw

    def test_built_model_survives_text(self, small_pool, small_dinst):
        model = qubo.build(small_pool, small_dinst)
        again = qubo.import_qubo(qubo.export(model))
        assert again == model
        assert not again.has_master
        with pytest.raises(ValueError):
            qubo.decompose(again, np.zeros(again.n, dtype=int))

    def test_header_comment_first(self, pool_a, dinst_a):
        text = qubo.export(qubo.build(pool_a, dinst_a)).decode()
        assert text.splitlines()[0] == qubo.HEADER_COMMENT
        assert text.splitlines()[1].startswith("qubo 3 ")

    def test_comments_and_blank_lines(self):
        model = qubo.import_qubo(b"\n# hello\nqubo 2 0.5 1.0\n\n0 1 -1.5\n# bye\n")
        assert model.coefficients == {(0, 1): -1.5}
        assert model.variables == ()
        assert qubo.energy(model, [1, 1]) == -1.0

    def test_explicit_zero_dropped(self):
        model = qubo.import_qubo(b"qubo 2 0.0 1.0\n0 0 0.0\n1 1 2.0\n")
        assert model.coefficients == {(1, 1): 2.0}

    @pytest.mark.parametrize("text,line", [
        (b"0 0 1.0\n", 1),                                  # entry before header
        (b"qubo 2 0.0\n", 1),                               # short header
        (b"qubo -2 0.0 1.0\n", 1),                          # negative N
        (b"qubo 2 0.0 1.0\n1 0 1.0\n", 2),                  # i > j
        (b"qubo 2 0.0 1.0\n0 2 1.0\n", 2),                  # j out of range
        (b"qubo 2 0.0 1.0\n0 1 1.0\n0 1 2.0\n", 3),         # duplicate
        (b"qubo 2 0.0 1.0\n0 1 nan\n", 2),                  # not finite
        (b"qubo 2 0.0 1.0\n0 1 abc\n", 2),                  # not a number
        (b"qubo 2 0.0 1.0\n0 1\n", 2),                      # missing value
        (b"qubo 1 0.0 1.0\n# var 0 lambda x:abc\n", 2),     # malformed var line
        (b"qubo 2 0.0 1.0\n# var 0 y 0\n# var 0 y 1\n", 3),  # duplicate var
        (b"qubo 2 0.0 1.0\n# var 0 y 0\n", 2),              # incomplete var map
        (b"# only a comment\n", 1),                         # no header
        (b"\xff\xfe", 1),                                   # not UTF-8
    ])
    def test_format_errors(self, text, line):
        with pytest.raises(QuboFormatError) as exc:
            qubo.import_qubo(text)
        assert exc.value.line == line
        assert str(exc.value).startswith(f"line {line}: ")
