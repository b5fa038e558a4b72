"""Domain models for the EV fleet charging and allocation problem.

An ``Instance`` holds continuous (kWh) quantities as read from an instance
file. ``discretize`` maps it once onto the integer energy grid; everything
downstream (graph, LP, QUBO, oracle) works in integer level counts.
"""

from dataclasses import dataclass, field
from typing import Optional
import math

from ..core.constants import GRID_TOL


class InstanceError(ValueError):
    """A malformed or inconsistent instance, located by field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class DiscretizationError(InstanceError):
    """The charging step does not land on the energy grid."""


def _snap(value: float) -> Optional[int]:
    """Nearest integer if ``value`` is one up to grid tolerance, else None."""
    nearest = round(value)
    if abs(value - nearest) <= GRID_TOL * max(1.0, abs(value)):
        return int(nearest)
    return None


def floor_level(energy: float, delta_e: float) -> int:
    """Largest level whose energy does not exceed ``energy``."""
    q = energy / delta_e
    snapped = _snap(q)
    return snapped if snapped is not None else math.floor(q)


def ceil_level(energy: float, delta_e: float) -> int:
    """Smallest level whose energy is at least ``energy``."""
    q = energy / delta_e
    snapped = _snap(q)
    return snapped if snapped is not None else math.ceil(q)


@dataclass(frozen=True)
class Vehicle:
    """An EV with its initial state of charge (kWh)."""
    id: int
    e0: float


@dataclass(frozen=True)
class Reservation:
    """A booking occupying timesteps ``t_start .. t_end - 1``."""
    id: int
    t_start: int
    t_end: int
    e_res: float          # expected consumption, kWh

    @property
    def duration(self) -> int:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Instance:
    """A continuous EVFCAP instance."""
    t_max: int
    e_cap: float
    delta_e: float
    p_max: float
    alpha: float
    c_uncov: float
    prices: tuple[float, ...]
    vehicles: tuple[Vehicle, ...] = ()
    reservations: tuple[Reservation, ...] = ()
    dt_hours: float = 0.25

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def n_reservations(self) -> int:
        return len(self.reservations)

    @property
    def i_max(self) -> Optional[int]:
        """Number of energy levels above zero, or None if off-grid."""
        if self.delta_e <= 0:
            return None
        return _snap(self.e_cap / self.delta_e)

    @property
    def charge_step(self) -> Optional[int]:
        """Levels gained by one timestep of charging, or None if off-grid."""
        if self.delta_e <= 0:
            return None
        return _snap(self.p_max * self.dt_hours / self.delta_e)

    def _numeric_fields(self):
        for name in ("dt_hours", "e_cap", "delta_e", "p_max", "alpha", "c_uncov"):
            yield name, float(getattr(self, name))
        for t, price in enumerate(self.prices):
            yield f"prices[{t}]", float(price)
        for k, vehicle in enumerate(self.vehicles):
            yield f"vehicles[{k}].e0", float(vehicle.e0)
        for k, res in enumerate(self.reservations):
            yield f"reservations[{k}].e_res", float(res.e_res)

    def validate(self) -> list[InstanceError]:
        """Check all invariants. Returns the problems found (empty when valid)."""
        problems: list[InstanceError] = []

        def bad(path: str, message: str) -> None:
            problems.append(InstanceError(path, message))

        # NaN slips through every ordered comparison below, so finiteness comes first.
        for path, value in self._numeric_fields():
            if not math.isfinite(value):
                bad(path, f"must be finite, got {value}")
        if problems:
            return problems

        if self.t_max < 1:
            bad("t_max", f"must be >= 1, got {self.t_max}")
        if not self.dt_hours > 0:
            bad("dt_hours", f"must be > 0, got {self.dt_hours}")
        if not self.e_cap > 0:
            bad("e_cap", f"must be > 0, got {self.e_cap}")
        if not self.delta_e > 0:
            bad("delta_e", f"must be > 0, got {self.delta_e}")
        if not self.p_max > 0:
            bad("p_max", f"must be > 0, got {self.p_max}")
        if self.alpha < 0:
            bad("alpha", f"must be >= 0, got {self.alpha}")
        if self.c_uncov < 0:
            bad("c_uncov", f"must be >= 0, got {self.c_uncov}")
        if len(self.prices) != self.t_max:
            bad("prices", f"expected {self.t_max} entries, got {len(self.prices)}")
        for t, price in enumerate(self.prices):
            if price < 0:
                bad(f"prices[{t}]", f"must be >= 0, got {price}")

        if self.e_cap > 0 and self.delta_e > 0 and self.i_max is None:
            bad("delta_e", f"e_cap={self.e_cap} is not a whole number of delta_e={self.delta_e} steps")

        for k, vehicle in enumerate(self.vehicles):
            if vehicle.id != k:
                bad(f"vehicles[{k}].id", f"ids must be contiguous from 0, got {vehicle.id}")
            if not 0 <= vehicle.e0 <= self.e_cap:
                bad(f"vehicles[{k}].e0", f"must lie in [0, {self.e_cap}], got {vehicle.e0}")

        for k, res in enumerate(self.reservations):
            if res.id != k:
                bad(f"reservations[{k}].id", f"ids must be contiguous from 0, got {res.id}")
            if not 0 <= res.t_start < res.t_end <= self.t_max:
                bad(
                    f"reservations[{k}]",
                    f"need 0 <= t_start < t_end <= {self.t_max}, got [{res.t_start}, {res.t_end})",
                )
            if not 0 < res.e_res <= self.e_cap:
                bad(f"reservations[{k}].e_res", f"must lie in (0, {self.e_cap}], got {res.e_res}")

        return problems

    def check(self) -> "Instance":
        """Raise the first invariant violation, if any."""
        problems = self.validate()
        if problems:
            raise problems[0]
        return self

    def summary(self) -> str:
        """One-line description."""
        return (
            f"n={self.n_vehicles} r_max={self.n_reservations} t_max={self.t_max} "
            f"i_max={self.i_max} e_cap={self.e_cap:g}kWh p_max={self.p_max:g}kW "
            f"dt={self.dt_hours:g}h alpha={self.alpha:g} c_uncov={self.c_uncov:g}"
        )


@dataclass(frozen=True)
class DiscreteVehicle:
    id: int
    level: int            # floor(e0 / delta_e)


@dataclass(frozen=True)
class DiscreteReservation:
    id: int
    t_start: int
    t_end: int
    level: int            # ceil(e_res / delta_e)


@dataclass(frozen=True)
class DiscretizedInstance:
    """An instance on the integer energy grid.

    Costs stay in (float) currency; energies are level counts.
    """
    t_max: int
    dt_hours: float
    e_cap: float
    delta_e: float
    i_max: int
    p_max: float
    charge_step: int      # levels gained per charging timestep
    alpha: float
    c_uncov: float
    prices: tuple[float, ...]
    vehicles: tuple[DiscreteVehicle, ...] = ()
    reservations: tuple[DiscreteReservation, ...] = ()
    _charge_costs: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        costs = tuple(price * self.p_max * self.dt_hours for price in self.prices)
        object.__setattr__(self, "_charge_costs", costs)

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    @property
    def n_reservations(self) -> int:
        return len(self.reservations)

    def charge_cost(self, t: int) -> float:
        """Cost of charging at full power during timestep ``t``."""
        return self._charge_costs[t]

    def terminal_cost(self, level: int) -> float:
        """Future-cost penalty for ending the horizon at ``level``."""
        return self.alpha * (self.i_max - level) * self.delta_e

    def uncovered_cost(self, reservation_id: int) -> float:
        """Cost of serving a reservation with a fuel car."""
        return self.c_uncov * self.reservations[reservation_id].level * self.delta_e

    def trivial_cost(self, vehicle_id: int) -> float:
        """Cost of the all-idle plan of a vehicle."""
        return self.terminal_cost(self.vehicles[vehicle_id].level)

    def all_trivial_cost(self) -> float:
        """Master cost when every vehicle idles and no reservation is served."""
        return sum(self.trivial_cost(v.id) for v in self.vehicles) + sum(
            self.uncovered_cost(r.id) for r in self.reservations
        )

    def to_instance(self) -> Instance:
        """Grid-aligned continuous instance with the same levels."""
        return Instance(
            t_max=self.t_max,
            dt_hours=self.dt_hours,
            e_cap=self.e_cap,
            delta_e=self.delta_e,
            p_max=self.p_max,
            alpha=self.alpha,
            c_uncov=self.c_uncov,
            prices=self.prices,
            vehicles=tuple(Vehicle(v.id, v.level * self.delta_e) for v in self.vehicles),
            reservations=tuple(
                Reservation(r.id, r.t_start, r.t_end, r.level * self.delta_e) for r in self.reservations
            ),
        )


def discretize(inst: Instance) -> DiscretizedInstance:
    """Map an instance onto its energy grid.

    Initial charge is rounded down and reservation energy up, so a discrete
    plan is always feasible for the continuous instance.

    Raises:
        InstanceError: If an instance invariant does not hold.
        DiscretizationError: If ``p_max * dt_hours`` is not a positive whole
            number of ``delta_e`` steps.
    """
    inst.check()
    step = inst.charge_step
    if step is None or step < 1:
        raise DiscretizationError(
            "p_max",
            f"p_max*dt_hours={inst.p_max * inst.dt_hours:g}kWh must be a positive integer "
            f"multiple of delta_e={inst.delta_e:g}kWh",
        )
    i_max = inst.i_max

    vehicles = tuple(
        DiscreteVehicle(v.id, min(i_max, max(0, floor_level(v.e0, inst.delta_e))))
        for v in inst.vehicles
    )
    reservations = tuple(
        DiscreteReservation(r.id, r.t_start, r.t_end, min(i_max, max(1, ceil_level(r.e_res, inst.delta_e))))
        for r in inst.reservations
    )

    return DiscretizedInstance(
        t_max=inst.t_max,
        dt_hours=inst.dt_hours,
        e_cap=inst.e_cap,
        delta_e=inst.delta_e,
        i_max=i_max,
        p_max=inst.p_max,
        charge_step=step,
        alpha=inst.alpha,
        c_uncov=inst.c_uncov,
        prices=tuple(inst.prices),
        vehicles=vehicles,
        reservations=reservations,
    )
