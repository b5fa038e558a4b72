"""Graph of feasible single-vehicle exploitation scenarios.

Nodes are (SoC level, timestep) pairs plus a source and a sink. Every arc
moves strictly forward in time, so node ids ordered by (t, level) are a
topological order and shortest paths come from one layered DP pass.

Node ids::

    source = 0
    grid(level, t) = 1 + t * (i_max + 1) + level
    sink = 1 + (t_max + 1) * (i_max + 1)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional
import hashlib
import json
import logging
import math

import numpy as np

from .constants import COST_TOL
from ..storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)


class PathLimitError(ValueError):
    """Full path enumeration would exceed the configured cap."""


class NodeKind(Enum):
    SOURCE = "source"
    SINK = "sink"
    GRID = "grid"


class ArcKind(Enum):
    VEHICLE_SELECT = "vehicle-select"
    CHARGE = "charge"
    IDLE = "idle"
    SERVE = "serve"
    TERMINAL = "terminal"


_KIND_CODES = {kind: code for code, kind in enumerate(ArcKind)}
_CODE_KINDS = {code: kind for kind, code in _KIND_CODES.items()}


@dataclass(frozen=True)
class Node:
    kind: NodeKind
    level: Optional[int] = None
    t: Optional[int] = None

    def label(self):
        """JSON-friendly form: ``"source"``, ``"sink"`` or ``[level, t]``."""
        if self.kind is NodeKind.GRID:
            return [self.level, self.t]
        return self.kind.value


@dataclass(frozen=True)
class Arc:
    index: int
    tail: int
    head: int
    kind: ArcKind
    ref: Optional[int]          # vehicle id (select) or reservation id (serve)
    base_cost: float


@dataclass(frozen=True)
class ArcWeights:
    """Dual bonuses; a Serve(r) arc costs ``base_cost - reservation_bonus[r]``."""
    reservation_bonus: Mapping[int, float] = field(default_factory=dict)

    def bonus(self, reservation_id: int) -> float:
        return self.reservation_bonus.get(reservation_id, 0.0)


@dataclass(frozen=True)
class Column:
    """One vehicle exploitation plan (a source-to-sink path)."""
    vehicle: int
    arcs: tuple[int, ...]
    served: frozenset[int]
    cost: float
    trivial: bool = field(default=False, compare=False)

    @property
    def key(self) -> tuple:
        """Identity used for pool deduplication."""
        return (self.vehicle, tuple(sorted(self.served)), self.arcs)

    @property
    def content_hash(self) -> str:
        """Short stable hash of the plan, used in QUBO variable maps."""
        payload = json.dumps({"vehicle": self.vehicle, "arcs": list(self.arcs)}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]

    def weighted_cost(self, weights: ArcWeights) -> float:
        return self.cost - sum(weights.bonus(r) for r in self.served)


class ScenarioGraph:
    """Weighted DAG of exploitation scenarios for one discretized instance.

    Immutable after construction; pricing queries for different vehicles may
    run concurrently.
    """

    def __init__(self, dinst: DiscretizedInstance):
        self.dinst = dinst
        self.levels = dinst.i_max + 1
        self.source = 0
        self.sink = 1 + (dinst.t_max + 1) * self.levels
        self.n_nodes = self.sink + 1

        tails: list[int] = []
        heads: list[int] = []
        kinds: list[int] = []
        refs: list[int] = []
        costs: list[float] = []

        def add(tail: int, head: int, kind: ArcKind, ref: int, cost: float) -> None:
            tails.append(tail)
            heads.append(head)
            kinds.append(_KIND_CODES[kind])
            refs.append(ref)
            costs.append(cost)

        for vehicle in dinst.vehicles:
            add(self.source, self.grid(vehicle.level, 0), ArcKind.VEHICLE_SELECT, vehicle.id, 0.0)

        k = dinst.charge_step
        for t in range(dinst.t_max):
            charge_cost = dinst.charge_cost(t)
            for level in range(self.levels):
                if level + k <= dinst.i_max:
                    add(self.grid(level, t), self.grid(level + k, t + 1), ArcKind.CHARGE, -1, charge_cost)
                add(self.grid(level, t), self.grid(level, t + 1), ArcKind.IDLE, -1, 0.0)

        for res in dinst.reservations:
            for level in range(res.level, self.levels):
                add(self.grid(level, res.t_start), self.grid(level - res.level, res.t_end),
                    ArcKind.SERVE, res.id, 0.0)

        for level in range(self.levels):
            add(self.grid(level, dinst.t_max), self.sink, ArcKind.TERMINAL, -1, dinst.terminal_cost(level))

        self.tail = np.asarray(tails, dtype=np.int64)
        self.head = np.asarray(heads, dtype=np.int64)
        self.kind = np.asarray(kinds, dtype=np.int8)
        self.ref = np.asarray(refs, dtype=np.int64)
        self.base_cost = np.asarray(costs, dtype=np.float64)
        self.n_arcs = len(tails)
        self.select_arc = {v.id: v.id for v in dinst.vehicles}

        # Index into the dual bonus vector; non-serve arcs point at a trailing zero.
        is_serve = self.kind == _KIND_CODES[ArcKind.SERVE]
        self._bonus_slot = np.where(is_serve, self.ref, dinst.n_reservations)

        # Layers by head time (sink is layer t_max + 1); select arcs are not layered.
        head_time = np.where(self.head == self.sink, dinst.t_max + 1, (self.head - 1) // self.levels)
        layered = np.arange(len(dinst.vehicles), self.n_arcs)
        self._layers = [layered[head_time[layered] == t] for t in range(1, dinst.t_max + 2)]

        self._out_arcs: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a in layered:
            self._out_arcs[int(self.tail[a])].append(int(a))

        logger.debug(f"Built scenario graph: {self.n_nodes} nodes, {self.n_arcs} arcs")

    # ------------------------------------------------------------------
    # Nodes and arcs
    # ------------------------------------------------------------------

    def grid(self, level: int, t: int) -> int:
        return 1 + t * self.levels + level

    def node(self, node_id: int) -> Node:
        if node_id == self.source:
            return Node(NodeKind.SOURCE)
        if node_id == self.sink:
            return Node(NodeKind.SINK)
        t, level = divmod(node_id - 1, self.levels)
        return Node(NodeKind.GRID, level=level, t=t)

    def arc(self, index: int) -> Arc:
        kind = _CODE_KINDS[int(self.kind[index])]
        ref = int(self.ref[index]) if kind in (ArcKind.VEHICLE_SELECT, ArcKind.SERVE) else None
        return Arc(index, int(self.tail[index]), int(self.head[index]), kind, ref, float(self.base_cost[index]))

    def arcs(self) -> Iterator[Arc]:
        for index in range(self.n_arcs):
            yield self.arc(index)

    def count_arcs(self, kind: ArcKind) -> int:
        return int(np.count_nonzero(self.kind == _KIND_CODES[kind]))

    # ------------------------------------------------------------------
    # Columns
    # ------------------------------------------------------------------

    def make_column(self, vehicle: int, arcs: tuple[int, ...]) -> Column:
        """Build a column from an arc path, checking it is connected."""
        assert arcs and arcs[0] == self.select_arc[vehicle], "path must start with the vehicle's select arc"
        assert int(self.head[arcs[-1]]) == self.sink, "path must end at the sink"
        served = []
        trivial = True
        for prev, nxt in zip(arcs, arcs[1:]):
            assert self.head[prev] == self.tail[nxt], f"arcs {prev} and {nxt} are not connected"
        for a in arcs:
            code = int(self.kind[a])
            if code == _KIND_CODES[ArcKind.SERVE]:
                served.append(int(self.ref[a]))
            if code in (_KIND_CODES[ArcKind.SERVE], _KIND_CODES[ArcKind.CHARGE]):
                trivial = False
        assert len(served) == len(set(served)), "a reservation appears twice on one path"
        cost = math.fsum(float(self.base_cost[a]) for a in arcs)
        return Column(vehicle=vehicle, arcs=tuple(arcs), served=frozenset(served), cost=cost, trivial=trivial)

    def column_cost(self, column: Column) -> float:
        """Recompute a column's cost from its arcs."""
        return math.fsum(float(self.base_cost[a]) for a in column.arcs)

    def trivial_column(self, vehicle: int) -> Column:
        """The all-idle plan: select, idle through the horizon, terminal."""
        level = self.dinst.vehicles[vehicle].level
        idle = _KIND_CODES[ArcKind.IDLE]
        path = [self.select_arc[vehicle]]
        for t in range(self.dinst.t_max):
            tail = self.grid(level, t)
            path.append(next(a for a in self._out_arcs[tail] if self.kind[a] == idle))
        path.extend(a for a in self._out_arcs[self.grid(level, self.dinst.t_max)])
        return self.make_column(vehicle, tuple(path))

    def cheapest_scenario(self, vehicle: int, weights: Optional[ArcWeights] = None) -> tuple[Column, float]:
        """Minimum effective-cost plan for ``vehicle``.

        Returns the column (base costs only) and its weighted cost, i.e. the
        column cost minus the bonuses of the reservations it serves. Ties go
        to the smallest predecessor node, then the smallest arc index.
        """
        weights = weights or ArcWeights()
        bonus = np.zeros(self.dinst.n_reservations + 1)
        for r, value in weights.reservation_bonus.items():
            bonus[r] = value
        effective = self.base_cost - bonus[self._bonus_slot]

        dist = np.full(self.n_nodes, np.inf)
        pred = np.full(self.n_nodes, -1, dtype=np.int64)
        entry = self.grid(self.dinst.vehicles[vehicle].level, 0)
        dist[entry] = 0.0

        for layer in self._layers:
            if layer.size == 0:
                continue
            tails = self.tail[layer]
            heads = self.head[layer]
            cand = dist[tails] + effective[layer]
            order = np.lexsort((layer, tails, cand, heads))
            sorted_heads = heads[order]
            first = np.ones(order.size, dtype=bool)
            first[1:] = sorted_heads[1:] != sorted_heads[:-1]
            winners = order[first]
            reached = np.isfinite(cand[winners])
            winners = winners[reached]
            dist[heads[winners]] = cand[winners]
            pred[heads[winners]] = layer[winners]

        path = []
        node = self.sink
        while node != entry:
            a = int(pred[node])
            assert a >= 0, "sink unreachable; the all-idle path always exists"
            path.append(a)
            node = int(self.tail[a])
        path.append(self.select_arc[vehicle])
        path.reverse()

        column = self.make_column(vehicle, tuple(path))
        weighted = float(dist[self.sink])
        expected = column.weighted_cost(weights)
        assert math.isclose(weighted, expected, rel_tol=1e-9, abs_tol=1e3 * COST_TOL), (
            f"weighted cost {weighted} disagrees with column recomputation {expected}"
        )
        return column, weighted

    # ------------------------------------------------------------------
    # Enumeration
    # ------------------------------------------------------------------

    def count_paths(self, vehicle: int) -> int:
        """Number of source-to-sink paths through ``vehicle``'s select arc."""
        count = np.zeros(self.n_nodes, dtype=np.float64)
        count[self.grid(self.dinst.vehicles[vehicle].level, 0)] = 1.0
        for layer in self._layers:
            np.add.at(count, self.head[layer], count[self.tail[layer]])
        total = count[self.sink]
        return int(total) if total < 2 ** 53 else math.inf

    def enumerate_columns(self, vehicle: int, limit: int) -> list[Column]:
        """All plans of ``vehicle`` in depth-first arc order.

        Raises:
            PathLimitError: If there are more than ``limit`` paths.
        """
        n_paths = self.count_paths(vehicle)
        if n_paths > limit:
            raise PathLimitError(f"vehicle {vehicle} has {n_paths} paths, limit is {limit}")

        columns = []
        start = self.grid(self.dinst.vehicles[vehicle].level, 0)
        stack: list[tuple[int, int]] = [(start, 0)]
        path: list[int] = [self.select_arc[vehicle]]
        while stack:
            node, next_out = stack[-1]
            outs = self._out_arcs[node]
            if node == self.sink:
                columns.append(self.make_column(vehicle, tuple(path)))
                stack.pop()
                path.pop()
                continue
            if next_out == len(outs):
                stack.pop()
                path.pop()
                continue
            stack[-1] = (node, next_out + 1)
            a = outs[next_out]
            path.append(a)
            stack.append((int(self.head[a]), 0))
        return columns

    def describe_column(self, column: Column) -> list[dict]:
        """Arc-by-arc rendering of a plan for solution files."""
        rows = []
        for a in column.arcs:
            arc = self.arc(a)
            row = {
                "kind": arc.kind.value,
                "from": self.node(arc.tail).label(),
                "to": self.node(arc.head).label(),
                "cost": arc.base_cost,
            }
            if arc.kind is ArcKind.SERVE:
                row["reservation"] = arc.ref
            rows.append(row)
        return rows


def build_graph(dinst: DiscretizedInstance) -> ScenarioGraph:
    """Build the scenario graph of a discretized instance."""
    return ScenarioGraph(dinst)
