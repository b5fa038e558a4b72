"""QUBO form of the integer set-partition master.

Each master equality ``sum(x) = 1`` becomes the penalty ``M * (sum(x) - 1)^2``
expanded with ``x^2 = x``: ``-M`` on every member's diagonal, ``+2M`` on every
member pair and ``+M`` in the offset. The offset is kept so that energies of
feasible points equal the master cost in currency.

Text format::

    # comment lines start with '#'
    qubo <N> <offset> <M>
    <i> <j> <value>          one line per nonzero, 0 <= i <= j < N
    # var <i> lambda <vehicle>:<column hash>
    # var <i> y <reservation>
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence
import logging
import math
import re

import dimod
import numpy as np
import scipy.sparse as sp

from .colgen import ColumnPool
from ..storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

HEADER_COMMENT = "# evfleet QUBO: energy = offset + sum_{i<=j} Q_ij x_i x_j"
_VAR_RE = re.compile(r"^#\s*var\s+(\d+)\s+(lambda\s+(\d+):([0-9A-Za-z]+)|y\s+(\d+))\s*$")


class QuboFormatError(ValueError):
    """Malformed QUBO text, located by 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class QuboVariable:
    """A lambda (pool column) or y (uncovered reservation) variable."""
    kind: str                          # "lambda" or "y"
    vehicle: Optional[int] = None
    column_hash: Optional[str] = None
    reservation: Optional[int] = None

    def label(self) -> str:
        if self.kind == "lambda":
            return f"lambda {self.vehicle}:{self.column_hash}"
        return f"y {self.reservation}"


@dataclass(frozen=True)
class PenaltyRow:
    """One penalized constraint over variable indices."""
    members: tuple[int, ...]
    exact: bool = True                 # sum == 1, else sum <= 1

    def violation(self, x: np.ndarray) -> int:
        total = int(x[list(self.members)].sum()) if self.members else 0
        if self.exact:
            return (total - 1) ** 2
        return total * (total - 1) // 2


@dataclass(frozen=True)
class QuboModel:
    """``energy(x) = offset + sum_{i<=j} Q[i, j] x_i x_j`` over binary x.

    ``linear_objective``, ``objective_offset`` and ``rows`` describe the master
    the model was built from; they are absent on models read from text and
    do not take part in equality.
    """
    n: int
    coefficients: dict[tuple[int, int], float]
    offset: float
    penalty_weight: float
    variables: tuple[QuboVariable, ...] = ()
    linear_objective: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    objective_offset: float = field(default=0.0, compare=False)
    rows: tuple[PenaltyRow, ...] = field(default=(), compare=False, repr=False)

    @property
    def has_master(self) -> bool:
        return self.linear_objective is not None

    @cached_property
    def diagonal(self) -> np.ndarray:
        diag = np.zeros(self.n)
        for (i, j), value in self.coefficients.items():
            if i == j:
                diag[i] = value
        return diag

    @cached_property
    def couplings(self) -> sp.csr_matrix:
        """Symmetric off-diagonal couplings W with W[i, j] = W[j, i] = Q[i, j]."""
        pairs = [(i, j, v) for (i, j), v in self.coefficients.items() if i != j]
        if not pairs:
            return sp.csr_matrix((self.n, self.n))
        rows, cols, vals = map(np.asarray, zip(*pairs))
        W = sp.coo_matrix(
            (np.concatenate([vals, vals]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
            shape=(self.n, self.n),
        )
        return W.tocsr()

    def local_fields(self, x: np.ndarray) -> np.ndarray:
        """Energy change of setting each bit from 0 to 1 given the other bits."""
        return self.diagonal + self.couplings @ x

    def flip_magnitudes(self) -> tuple[float, float]:
        """(largest, smallest nonzero) single-flip energy change bound estimates."""
        abs_rows = np.abs(self.couplings).sum(axis=1).A1 if self.n else np.zeros(0)
        largest = float(np.max(np.abs(self.diagonal) + abs_rows)) if self.n else 0.0
        values = np.abs(np.fromiter(self.coefficients.values(), dtype=float, count=len(self.coefficients)))
        nonzero = values[values > 0]
        smallest = float(nonzero.min()) if nonzero.size else 0.0
        return largest, smallest

    def variable_index(self) -> dict[str, int]:
        return {var.label(): i for i, var in enumerate(self.variables)}

    def to_bqm(self) -> dimod.BinaryQuadraticModel:
        """Binary quadratic model with integer variable labels 0..N-1."""
        bqm = dimod.BinaryQuadraticModel(vartype=dimod.BINARY)
        for i in range(self.n):
            bqm.add_variable(i, 0.0)
        for (i, j), value in self.coefficients.items():
            if i == j:
                bqm.add_linear(i, value)
            else:
                bqm.add_quadratic(i, j, value)
        bqm.offset = self.offset
        return bqm

    @classmethod
    def from_bqm(cls, bqm: dimod.BinaryQuadraticModel, penalty_weight: float = 0.0,
                 variables: Sequence[QuboVariable] = ()) -> "QuboModel":
        """Model from a BINARY bqm labelled 0..N-1."""
        if bqm.vartype is not dimod.BINARY:
            bqm = bqm.change_vartype(dimod.BINARY, inplace=False)
        n = len(bqm.variables)
        if set(bqm.variables) != set(range(n)):
            raise ValueError("bqm variables must be labelled 0..N-1")
        coefficients: dict[tuple[int, int], float] = {}
        for i, value in bqm.linear.items():
            if value != 0.0:
                coefficients[(int(i), int(i))] = float(value)
        for (u, v), value in bqm.quadratic.items():
            if value != 0.0:
                coefficients[(min(int(u), int(v)), max(int(u), int(v)))] = float(value)
        return cls(n=n, coefficients=dict(sorted(coefficients.items())), offset=float(bqm.offset),
                   penalty_weight=float(penalty_weight), variables=tuple(variables))


def default_penalty_weight(pool: ColumnPool, dinst: DiscretizedInstance) -> float:
    """M = 2 * (sum of positive column costs + sum of uncovered costs) + 1."""
    positive = math.fsum(max(column.cost, 0.0) for column in pool)
    uncovered = math.fsum(dinst.uncovered_cost(r.id) for r in dinst.reservations)
    return 2.0 * (positive + uncovered) + 1.0


def build(pool: ColumnPool, dinst: DiscretizedInstance, penalty_weight: Optional[float] = None,
          include_uncovered: bool = True) -> QuboModel:
    """Expand the master over ``pool`` into a QUBO.

    Args:
        pool: Column pool (must hold the trivial columns).
        dinst: Instance the pool was generated for.
        penalty_weight: Overrides the default dominating weight M.
        include_uncovered: If False, the y variables are dropped; each
            reservation row becomes an at-most-one penalty and serving it earns
            its uncovered cost back through a linear reward.
    """
    if len(pool) == 0:
        raise ValueError("cannot build a QUBO from an empty pool")
    M = float(penalty_weight) if penalty_weight is not None else default_penalty_weight(pool, dinst)
    if not M > 0:
        raise ValueError(f"penalty weight must be > 0, got {M}")

    variables = [QuboVariable("lambda", vehicle=c.vehicle, column_hash=c.content_hash) for c in pool]
    objective = [column.cost for column in pool]
    if include_uncovered:
        for res in dinst.reservations:
            variables.append(QuboVariable("y", reservation=res.id))
            objective.append(dinst.uncovered_cost(res.id))
    n = len(variables)
    linear = np.asarray(objective, dtype=float)
    objective_offset = 0.0

    Q: dict[tuple[int, int], float] = {}

    def add(i: int, j: int, value: float) -> None:
        key = (i, j) if i <= j else (j, i)
        Q[key] = Q.get(key, 0.0) + value

    rows: list[PenaltyRow] = []
    covering: dict[int, list[int]] = {res.id: [] for res in dinst.reservations}
    for p, column in enumerate(pool):
        for r in column.served:
            covering[r].append(p)
    for k, res in enumerate(dinst.reservations):
        if include_uncovered:
            rows.append(PenaltyRow(tuple(covering[res.id]) + (len(pool) + k,), exact=True))
        else:
            rows.append(PenaltyRow(tuple(covering[res.id]), exact=False))
            reward = dinst.uncovered_cost(res.id)
            for p in covering[res.id]:
                linear[p] -= reward
            objective_offset += reward
    for vehicle in dinst.vehicles:
        rows.append(PenaltyRow(tuple(pool.columns_for_vehicle(vehicle.id)), exact=True))

    for i, value in enumerate(linear):
        add(i, i, float(value))
    offset = objective_offset
    for row in rows:
        members = row.members
        if row.exact:
            offset += M
            for i in members:
                add(i, i, -M)
            pair_weight = 2.0 * M
        else:
            pair_weight = M
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                add(members[a], members[b], pair_weight)

    coefficients = {key: value for key, value in sorted(Q.items()) if value != 0.0}
    logger.info(f"[QUBO] Built N={n} nonzeros={len(coefficients)} M={M:.6g} offset={offset:.6g}")
    return QuboModel(
        n=n, coefficients=coefficients, offset=offset, penalty_weight=M, variables=tuple(variables),
        linear_objective=linear, objective_offset=objective_offset, rows=tuple(rows),
    )


def _as_bits(m: QuboModel, x: Iterable[int]) -> np.ndarray:
    bits = np.asarray(list(x) if not isinstance(x, np.ndarray) else x, dtype=np.int64)
    if bits.shape != (m.n,):
        raise ValueError(f"expected {m.n} bits, got shape {bits.shape}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bit vector must be 0/1")
    return bits


def solution_bits(m: QuboModel, columns: Iterable[int], uncovered: Sequence[int]) -> np.ndarray:
    """Bit vector of a master solution (pool columns, y per reservation) over the variables of ``m``."""
    bits = np.zeros(m.n, dtype=np.int64)
    bits[list(columns)] = 1
    for k, var in enumerate(m.variables):
        if var.kind == "y" and uncovered[var.reservation]:
            bits[k] = 1
    return bits


def energy(m: QuboModel, x: Iterable[int]) -> float:
    """``offset + sum_{i<=j} Q_ij x_i x_j``."""
    bits = _as_bits(m, x).astype(float)
    return float(m.offset + bits @ m.diagonal + 0.5 * bits @ (m.couplings @ bits))


def decompose(m: QuboModel, x: Iterable[int]) -> tuple[float, float]:
    """Split the energy of ``x`` into (master objective, penalty).

    The penalty is non-negative and zero exactly on feasible points.

    Raises:
        ValueError: If ``m`` was not built from a master (e.g. read from text).
    """
    if not m.has_master:
        raise ValueError("model carries no master structure to decompose against")
    bits = _as_bits(m, x)
    objective = float(m.objective_offset + m.linear_objective @ bits)
    penalty = m.penalty_weight * sum(row.violation(bits) for row in m.rows)
    return objective, float(penalty)


def is_feasible(m: QuboModel, x: Iterable[int]) -> bool:
    if not m.has_master:
        raise ValueError("model carries no master structure")
    bits = _as_bits(m, x)
    return all(row.violation(bits) == 0 for row in m.rows)


def export(m: QuboModel) -> bytes:
    """Canonical text encoding; floats use ``repr`` so they round-trip exactly."""
    lines = [HEADER_COMMENT, f"qubo {m.n} {float(m.offset)!r} {float(m.penalty_weight)!r}"]
    for (i, j), value in sorted(m.coefficients.items()):
        if value != 0.0:
            lines.append(f"{i} {j} {float(value)!r}")
    for index, var in enumerate(m.variables):
        lines.append(f"# var {index} {var.label()}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_float(token: str, line: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise QuboFormatError(line, f"{what} is not a number: {token!r}") from None
    if not math.isfinite(value):
        raise QuboFormatError(line, f"{what} must be finite, got {token!r}")
    return value


def _parse_int(token: str, line: int, what: str) -> int:
    if not re.fullmatch(r"\d+", token):
        raise QuboFormatError(line, f"{what} is not a non-negative integer: {token!r}")
    return int(token)


def import_qubo(raw: bytes) -> QuboModel:
    """Parse the text format.

    Raises:
        QuboFormatError: On any malformed line.
    """
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise QuboFormatError(1, f"not UTF-8: {e}") from e

    header = None
    coefficients: dict[tuple[int, int], float] = {}
    var_lines: dict[int, QuboVariable] = {}
    n = 0
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            if re.match(r"^#\s*var\b", stripped):
                match = _VAR_RE.match(stripped)
                if not match:
                    raise QuboFormatError(line_no, f"malformed variable line: {stripped!r}")
                index = int(match.group(1))
                if index in var_lines:
                    raise QuboFormatError(line_no, f"variable {index} declared twice")
                if match.group(3) is not None:
                    var_lines[index] = QuboVariable("lambda", vehicle=int(match.group(3)),
                                                    column_hash=match.group(4))
                else:
                    var_lines[index] = QuboVariable("y", reservation=int(match.group(5)))
            continue

        tokens = stripped.split()
        if header is None:
            if len(tokens) != 4 or tokens[0] != "qubo":
                raise QuboFormatError(line_no, "expected header 'qubo <N> <offset> <M>'")
            n = _parse_int(tokens[1], line_no, "N")
            header = (n, _parse_float(tokens[2], line_no, "offset"), _parse_float(tokens[3], line_no, "M"))
            continue
        if len(tokens) != 3:
            raise QuboFormatError(line_no, f"expected 'i j value', got {stripped!r}")
        i = _parse_int(tokens[0], line_no, "i")
        j = _parse_int(tokens[1], line_no, "j")
        if not i <= j < n:
            raise QuboFormatError(line_no, f"need 0 <= i <= j < {n}, got {i} {j}")
        if (i, j) in coefficients:
            raise QuboFormatError(line_no, f"duplicate entry ({i}, {j})")
        value = _parse_float(tokens[2], line_no, "value")
        if value != 0.0:
            coefficients[(i, j)] = value

    if header is None:
        raise QuboFormatError(max(1, len(text.splitlines())), "missing 'qubo' header")
    n, offset, M = header
    variables: tuple[QuboVariable, ...] = ()
    if var_lines:
        if sorted(var_lines) != list(range(n)):
            raise QuboFormatError(len(text.splitlines()), f"variable map must cover 0..{n - 1} exactly")
        variables = tuple(var_lines[i] for i in range(n))
    return QuboModel(n=n, coefficients=dict(sorted(coefficients.items())), offset=offset,
                     penalty_weight=M, variables=variables)
