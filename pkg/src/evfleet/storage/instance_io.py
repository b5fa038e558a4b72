"""JSON codec for instance files.

Schema (UTF-8 JSON object, unknown keys rejected)::

    {
      "t_max": int, "dt_hours": number, "e_cap": number, "delta_e": number,
      "p_max": number, "alpha": number, "c_uncov": number,
      "prices": [number] * t_max,
      "vehicles": [{"id": int, "e0": number}],
      "reservations": [{"id": int, "t_start": int, "t_end": int, "e_res": number}]
    }
"""

from pathlib import Path
from typing import Any
import json
import logging

from .models import Instance, InstanceError, Reservation, Vehicle, discretize

logger = logging.getLogger(__name__)

SCALAR_KEYS = ("t_max", "dt_hours", "e_cap", "delta_e", "p_max", "alpha", "c_uncov")
INT_KEYS = {"t_max"}
TOP_KEYS = SCALAR_KEYS + ("prices", "vehicles", "reservations")
VEHICLE_KEYS = ("id", "e0")
RESERVATION_KEYS = ("id", "t_start", "t_end", "e_res")
_RESERVATION_INTS = {"id", "t_start", "t_end"}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return (isinstance(value, (int, float)) and not isinstance(value, bool))


def _check_object(obj: Any, path: str, keys: tuple[str, ...], ints: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise InstanceError(path or "$", f"expected an object, got {type(obj).__name__}")
    prefix = f"{path}." if path else ""
    unknown = sorted(set(obj) - set(keys))
    if unknown:
        raise InstanceError(f"{prefix}{unknown[0]}", "unknown key")
    for key in keys:
        if key not in obj:
            raise InstanceError(f"{prefix}{key}", "missing required key")
        value = obj[key]
        if key in ints:
            if not _is_int(value):
                raise InstanceError(f"{prefix}{key}", f"expected an integer, got {value!r}")
        elif key in SCALAR_KEYS or key in ("e0", "e_res"):
            if not _is_number(value):
                raise InstanceError(f"{prefix}{key}", f"expected a number, got {value!r}")
    return obj


def _check_array(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise InstanceError(path, f"expected an array, got {type(value).__name__}")
    return value


def instance_from_dict(data: Any) -> Instance:
    """Build and validate an instance from decoded JSON."""
    _check_object(data, "", TOP_KEYS, INT_KEYS)

    prices = _check_array(data["prices"], "prices")
    for t, price in enumerate(prices):
        if not _is_number(price):
            raise InstanceError(f"prices[{t}]", f"expected a number, got {price!r}")
    if len(prices) != data["t_max"]:
        raise InstanceError("prices", f"expected {data['t_max']} entries, got {len(prices)}")

    vehicles = []
    for k, item in enumerate(_check_array(data["vehicles"], "vehicles")):
        _check_object(item, f"vehicles[{k}]", VEHICLE_KEYS, {"id"})
        vehicles.append(Vehicle(id=item["id"], e0=float(item["e0"])))

    reservations = []
    for k, item in enumerate(_check_array(data["reservations"], "reservations")):
        _check_object(item, f"reservations[{k}]", RESERVATION_KEYS, _RESERVATION_INTS)
        reservations.append(Reservation(
            id=item["id"], t_start=item["t_start"], t_end=item["t_end"], e_res=float(item["e_res"])
        ))

    inst = Instance(
        t_max=data["t_max"],
        dt_hours=float(data["dt_hours"]),
        e_cap=float(data["e_cap"]),
        delta_e=float(data["delta_e"]),
        p_max=float(data["p_max"]),
        alpha=float(data["alpha"]),
        c_uncov=float(data["c_uncov"]),
        prices=tuple(float(p) for p in prices),
        vehicles=tuple(vehicles),
        reservations=tuple(reservations),
    )
    inst.check()
    # Loader also enforces grid alignment of the charging step.
    discretize(inst)
    return inst


def instance_to_dict(inst: Instance) -> dict:
    """Plain-JSON representation with keys in schema order."""
    return {
        "t_max": inst.t_max,
        "dt_hours": inst.dt_hours,
        "e_cap": inst.e_cap,
        "delta_e": inst.delta_e,
        "p_max": inst.p_max,
        "alpha": inst.alpha,
        "c_uncov": inst.c_uncov,
        "prices": list(inst.prices),
        "vehicles": [{"id": v.id, "e0": v.e0} for v in inst.vehicles],
        "reservations": [
            {"id": r.id, "t_start": r.t_start, "t_end": r.t_end, "e_res": r.e_res}
            for r in inst.reservations
        ],
    }


def load_instance(raw: bytes) -> Instance:
    """Decode an instance file.

    Raises:
        InstanceError: On malformed JSON, schema violations and invariant
            violations; ``path`` names the offending field.
    """
    try:
        data = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise InstanceError("$", f"not UTF-8: {e}") from e
    except json.JSONDecodeError as e:
        raise InstanceError("$", f"malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    return instance_from_dict(data)


def save_instance(inst: Instance) -> bytes:
    """Encode an instance; ``save(load(x))`` reproduces ``save(x)`` byte for byte."""
    inst.check()
    return (json.dumps(instance_to_dict(inst), indent=2, allow_nan=False) + "\n").encode("utf-8")


def read_instance(path: Path) -> Instance:
    """Load an instance file from disk."""
    inst = load_instance(Path(path).read_bytes())
    logger.info(f"Loaded instance {path}: {inst.summary()}")
    return inst


def write_instance(inst: Instance, path: Path) -> Path:
    """Write an instance file, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(save_instance(inst))
    logger.info(f"Wrote instance {path}")
    return path
