"""
Tests for the instance file codec.
"""

import dataclasses
import json

import pytest

from evfleet.core import generator
from evfleet.storage.instance_io import (
    instance_to_dict, load_instance, read_instance, save_instance, write_instance
)
from evfleet.storage.models import DiscretizationError, InstanceError, discretize
from conftest import DATA_DIR


def encode(data) -> bytes:
    return json.dumps(data).encode("utf-8")


class TestLoadInstance:
    """Tests for load_instance()."""

    def test_round_trip_bytes(self, instance_a):
        raw = save_instance(instance_a)
        assert load_instance(raw) == instance_a
        assert save_instance(load_instance(raw)) == raw

    def test_keys_in_schema_order(self, instance_a):
        keys = list(json.loads(save_instance(instance_a)))
        assert keys[:3] == ["t_max", "dt_hours", "e_cap"]
        assert keys[-3:] == ["prices", "vehicles", "reservations"]

    def test_malformed_json(self):
        with pytest.raises(InstanceError) as exc:
            load_instance(b'{"t_max": 4,')
        assert exc.value.path == "$"
        assert "malformed JSON" in exc.value.message

    def test_not_utf8(self):
        with pytest.raises(InstanceError) as exc:
            load_instance(b"\xff\xfe")
        assert exc.value.path == "$"

    def test_unknown_key(self, instance_a):
        data = instance_to_dict(instance_a)
        data["colour"] = "blue"
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "colour"

    def test_missing_key(self, instance_a):
        data = instance_to_dict(instance_a)
        del data["alpha"]
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "alpha"

    def test_nested_path(self, instance_a):
        data = instance_to_dict(instance_a)
        data["reservations"][0]["t_start"] = 1.5
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "reservations[0].t_start"

    def test_boolean_is_not_a_number(self, instance_a):
        data = instance_to_dict(instance_a)
        data["vehicles"][0]["e0"] = True
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "vehicles[0].e0"

    def test_price_count(self, instance_a):
        data = instance_to_dict(instance_a)
        data["prices"] = data["prices"][:-1]
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "prices"

    def test_invariant_violation(self, instance_a):
        data = instance_to_dict(instance_a)
        data["reservations"][0]["t_end"] = 9
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "reservations[0]"

    def test_off_grid_charge_step(self, instance_a):
        data = instance_to_dict(instance_a)
        data["p_max"] = 5.0
        with pytest.raises(DiscretizationError):
            load_instance(encode(data))

    def test_infinite_number(self, instance_a):
        data = instance_to_dict(instance_a)
        data["alpha"] = float("inf")
        raw = encode(data)
        assert b"Infinity" in raw
        with pytest.raises(InstanceError) as exc:
            load_instance(raw)
        assert exc.value.path == "alpha"

    def test_nan_price(self, instance_a):
        data = instance_to_dict(instance_a)
        data["prices"][0] = float("nan")
        with pytest.raises(InstanceError) as exc:
            load_instance(encode(data))
        assert exc.value.path == "prices[0]"

    def test_save_rejects_non_finite(self, instance_a):
        bad = dataclasses.replace(instance_a, alpha=float("inf"))
        with pytest.raises(InstanceError) as exc:
            save_instance(bad)
        assert exc.value.path == "alpha"


class TestFiles:
    """Tests for reading and writing instance files."""

    def test_write_then_read(self, instance_b, tmp_dir):
        path = write_instance(instance_b, tmp_dir / "nested" / "b.json")
        assert path.exists()
        assert read_instance(path) == instance_b


class TestGolden:
    """Canonical files re-encode byte for byte."""

    def test_checked_in_instance(self):
        raw = (DATA_DIR / "instance_two_vehicles.json").read_bytes()
        inst = load_instance(raw)
        assert inst.n_vehicles == 2
        assert inst.prices == (0.15, 0.35, 0.2, 0.25)
        assert inst.reservations[1].e_res == 1.5
        assert discretize(inst).vehicles[1].level == 0
        assert save_instance(inst) == raw

    def test_generated_seed_42(self):
        raw = save_instance(generator.generate(42, 3, 12, 32))
        assert save_instance(load_instance(raw)) == raw
        assert save_instance(generator.generate(42, 3, 12, 32)) == raw
