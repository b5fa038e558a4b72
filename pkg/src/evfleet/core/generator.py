"""Seeded synthetic instance generator.

Scales mirror the reference benchmark family (n up to 20, r_max up to 16n,
t_max in {32, 96, 192}); the physical parameters and price curves are our
own, since the benchmark dataset is not public.
"""

from enum import Enum
from typing import Optional
import logging
import math

import numpy as np

from . import constants
from .seeds import component_seed
from ..storage.models import Instance, Reservation, Vehicle

logger = logging.getLogger(__name__)

BASE_PRICE = 0.25          # currency per kWh
DAY_NIGHT_AMPLITUDE = 0.10
CONSUMPTION_KW = 10.0      # mean draw of a reserved vehicle


class PriceProfile(Enum):
    """Shape of the grid price curve."""
    FLAT = "flat"
    DAY_NIGHT = "day-night"


def price_curve(profile: PriceProfile, t_max: int, dt_hours: float, start_hour: float = 0.0) -> list[float]:
    """Grid prices per timestep; day-night peaks at noon and bottoms out at midnight.

    A horizon shorter than a day is stretched onto one full day, so short
    instances still see both the night trough and the noon peak.
    """
    if profile is PriceProfile.FLAT:
        return [BASE_PRICE] * t_max
    step_hours = dt_hours if t_max * dt_hours >= 24.0 else 24.0 / t_max
    hours = start_hour + step_hours * np.arange(t_max)
    curve = BASE_PRICE + DAY_NIGHT_AMPLITUDE * np.sin(2.0 * math.pi * (hours - 6.0) / 24.0)
    return [round(float(p), 6) for p in curve]


def generate(
    seed: int,
    n_vehicles: int,
    n_reservations: int,
    t_max: int,
    profile: PriceProfile | str = PriceProfile.DAY_NIGHT,
    *,
    e_cap: float = constants.DEFAULT_E_CAP,
    levels: int = constants.DEFAULT_LEVELS,
    charge_levels: int = constants.DEFAULT_CHARGE_LEVELS,
    dt_hours: float = constants.DEFAULT_DT_HOURS,
    alpha: float = constants.DEFAULT_ALPHA,
    c_uncov: float = constants.DEFAULT_C_UNCOV,
    max_duration: Optional[int] = None,
) -> Instance:
    """Generate a random instance, deterministic in ``seed``.

    ``delta_e = e_cap / levels`` and ``p_max`` is chosen so one timestep of
    charging adds exactly ``charge_levels`` levels.

    Args:
        seed: User seed (split per component internally).
        n_vehicles: Fleet size (>= 1).
        n_reservations: Number of reservations (>= 0).
        t_max: Number of timesteps (>= 1).
        profile: Price curve, ``flat`` or ``day-night``.
        max_duration: Longest reservation in timesteps; defaults to t_max // 4.

    Raises:
        ValueError: On non-positive parameters.
    """
    profile = PriceProfile(profile)
    if n_vehicles < 1:
        raise ValueError(f"n_vehicles must be >= 1, got {n_vehicles}")
    if n_reservations < 0:
        raise ValueError(f"n_reservations must be >= 0, got {n_reservations}")
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    if levels < 1 or charge_levels < 1 or charge_levels > levels:
        raise ValueError(f"need 1 <= charge_levels <= levels, got {charge_levels}, {levels}")
    if not (e_cap > 0 and dt_hours > 0):
        raise ValueError("e_cap and dt_hours must be positive")
    if not (alpha > 0 and c_uncov > 0):
        raise ValueError("alpha and c_uncov must be strictly positive")

    rng = np.random.default_rng(component_seed(seed, "generator"))
    delta_e = e_cap / levels
    p_max = charge_levels * delta_e / dt_hours
    longest = max(1, max_duration if max_duration is not None else t_max // 4)
    longest = min(longest, t_max)

    vehicles = tuple(
        Vehicle(id=v, e0=round(float(rng.uniform(0.0, e_cap)), 2)) for v in range(n_vehicles)
    )

    drafts = []
    for _ in range(n_reservations):
        duration = int(rng.integers(1, longest + 1))
        t_start = int(rng.integers(0, t_max - duration + 1))
        # Energy grows with duration; noise keeps it off the grid.
        energy = CONSUMPTION_KW * duration * dt_hours * float(rng.uniform(0.4, 1.2))
        energy = round(min(e_cap, max(0.05 * e_cap, energy)), 2)
        drafts.append((t_start, t_start + duration, energy))
    drafts.sort(key=lambda d: (d[0], d[1]))
    reservations = tuple(
        Reservation(id=k, t_start=s, t_end=e, e_res=energy) for k, (s, e, energy) in enumerate(drafts)
    )

    inst = Instance(
        t_max=t_max,
        dt_hours=dt_hours,
        e_cap=e_cap,
        delta_e=delta_e,
        p_max=p_max,
        alpha=alpha,
        c_uncov=c_uncov,
        prices=tuple(price_curve(profile, t_max, dt_hours)),
        vehicles=vehicles,
        reservations=reservations,
    )
    inst.check()
    logger.info(f"Generated instance seed={seed} profile={profile.value}: {inst.summary()}")
    return inst
