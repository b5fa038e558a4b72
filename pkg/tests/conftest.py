"""
Pytest configuration and fixtures for evfleet tests.

Two hand-checked instances are used throughout:

* ``instance_a``: one vehicle (2 of 4 kWh), one reservation over timesteps 1-2
  needing 2 kWh, four timesteps at 0.2 per charging step. Optimum 1.4:
  charge at t=0, serve, charge at t=3.
* ``instance_b``: an empty and a full vehicle over three timesteps and no
  reservations. Optimum 1.1: the empty one charges every step.
"""

import pytest
import tempfile
import shutil
from pathlib import Path
from typing import Generator
import sys

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from evfleet.core import generator
from evfleet.core.colgen import ColumnPool
from evfleet.core.scenario_graph import ArcWeights, ScenarioGraph, build_graph
from evfleet.core.status import StatusManager
from evfleet.storage.models import (
    DiscretizedInstance, Instance, Reservation, Vehicle, discretize
)

DATA_DIR = Path(__file__).parent / "data"


def make_instance(t_max: int, vehicles: list[float], reservations: list[tuple[int, int, float]] = (),
                  price: float = 0.2, alpha: float = 0.5, c_uncov: float = 1.0) -> Instance:
    """Small instance on a 4 kWh / 1 kWh grid where one charging step adds one level."""
    return Instance(
        t_max=t_max,
        dt_hours=0.25,
        e_cap=4.0,
        delta_e=1.0,
        p_max=4.0,
        alpha=alpha,
        c_uncov=c_uncov,
        prices=tuple([price] * t_max),
        vehicles=tuple(Vehicle(v, e0) for v, e0 in enumerate(vehicles)),
        reservations=tuple(Reservation(r, s, e, energy) for r, (s, e, energy) in enumerate(reservations)),
    )


def tiny_instance(seed: int, n: int, r: int, t_max: int = 6) -> Instance:
    """Generated instance small enough for full path and assignment enumeration."""
    return generator.generate(seed, n, r, t_max, "day-night", levels=4, charge_levels=1, max_duration=2)


def serve_column(graph: ScenarioGraph, vehicle: int, reservations: list[int]):
    """Cheapest plan of ``vehicle`` when the given reservations are very attractive."""
    column, _ = graph.cheapest_scenario(vehicle, ArcWeights({r: 100.0 for r in reservations}))
    return column


@pytest.fixture
def tmp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test files."""
    tmp = Path(tempfile.mkdtemp(prefix="evfleet_test_"))
    yield tmp
    # Cleanup
    shutil.rmtree(tmp, ignore_errors=True)


@pytest.fixture
def instance_a() -> Instance:
    return make_instance(4, [2.0], [(1, 3, 2.0)])


@pytest.fixture
def instance_b() -> Instance:
    return make_instance(3, [0.0, 4.0])


@pytest.fixture
def dinst_a(instance_a: Instance) -> DiscretizedInstance:
    return discretize(instance_a)


@pytest.fixture
def dinst_b(instance_b: Instance) -> DiscretizedInstance:
    return discretize(instance_b)


@pytest.fixture
def graph_a(dinst_a: DiscretizedInstance) -> ScenarioGraph:
    return build_graph(dinst_a)


@pytest.fixture
def pool_a(graph_a: ScenarioGraph) -> ColumnPool:
    """Trivial column (index 0) and the 1.4 plan serving the reservation (index 1)."""
    pool = ColumnPool(graph_a)
    pool.add(serve_column(graph_a, 0, [0]))
    return pool


@pytest.fixture
def small_dinst() -> DiscretizedInstance:
    """Two vehicles, three reservations (two of them overlapping)."""
    return discretize(make_instance(6, [1.0, 3.0], [(0, 2, 1.0), (1, 3, 2.0), (3, 5, 1.0)]))


@pytest.fixture
def small_pool(small_dinst: DiscretizedInstance) -> ColumnPool:
    """A pool of at most a dozen columns with real conflicts between vehicles."""
    graph = build_graph(small_dinst)
    pool = ColumnPool(graph)
    for vehicle in (0, 1):
        for served in ([0], [1], [2], [0, 2], [1, 2], []):
            pool.add(serve_column(graph, vehicle, served))
    return pool


@pytest.fixture
def status() -> StatusManager:
    """Fresh status manager (not the process-wide one)."""
    return StatusManager()


class RecordingListener:
    """Status listener that records events for testing."""

    def __init__(self):
        self.events = []

    def __call__(self, event):
        self.events.append(event)

    def messages(self, level: str = None) -> list[str]:
        return [e.message for e in self.events if level is None or e.level.value == level]


@pytest.fixture
def recorder(status: StatusManager) -> RecordingListener:
    listener = RecordingListener()
    status.add_listener(listener)
    return listener
