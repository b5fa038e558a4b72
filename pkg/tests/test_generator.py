"""
Tests for the seeded instance generator.
"""

import pytest

from evfleet.core import generator
from evfleet.core.generator import PriceProfile, price_curve
from evfleet.storage.instance_io import save_instance
from evfleet.storage.models import discretize


class TestPriceCurve:
    """Tests for price_curve()."""

    def test_flat(self):
        assert price_curve(PriceProfile.FLAT, 5, 0.25) == [generator.BASE_PRICE] * 5

    def test_day_night_peaks_at_noon(self):
        prices = price_curve(PriceProfile.DAY_NIGHT, 96, 0.25)
        assert len(prices) == 96
        assert prices.index(max(prices)) == 48       # 12:00
        assert prices.index(min(prices)) == 0        # 00:00
        assert all(p > 0 for p in prices)

    def test_short_horizon_spans_a_day(self):
        low = generator.BASE_PRICE - generator.DAY_NIGHT_AMPLITUDE
        high = generator.BASE_PRICE + generator.DAY_NIGHT_AMPLITUDE
        assert price_curve(PriceProfile.DAY_NIGHT, 2, 0.25) == pytest.approx([low, high])
        prices = price_curve(PriceProfile.DAY_NIGHT, 6, 0.25)
        assert prices.index(min(prices)) == 0
        assert prices.index(max(prices)) == 3
        assert len(set(prices)) > 2

    def test_single_step_is_night_price(self):
        low = generator.BASE_PRICE - generator.DAY_NIGHT_AMPLITUDE
        assert price_curve(PriceProfile.DAY_NIGHT, 1, 0.25) == pytest.approx([low])


class TestGenerate:
    """Tests for generate()."""

    def test_deterministic_in_seed(self):
        a = generator.generate(7, 3, 12, 32)
        b = generator.generate(7, 3, 12, 32)
        assert save_instance(a) == save_instance(b)

    def test_seed_changes_instance(self):
        assert generator.generate(1, 2, 8, 32) != generator.generate(2, 2, 8, 32)

    def test_sizes_and_validity(self):
        inst = generator.generate(3, 5, 40, 96, "flat")
        assert inst.n_vehicles == 5
        assert inst.n_reservations == 40
        assert inst.t_max == 96
        assert inst.validate() == []

    def test_on_grid(self):
        """Generated instances always discretize with the requested grid."""
        inst = generator.generate(11, 2, 6, 32, levels=8, charge_levels=2)
        dinst = discretize(inst)
        assert dinst.i_max == 8
        assert dinst.charge_step == 2

    def test_reservations_sorted_and_bounded(self):
        inst = generator.generate(5, 2, 30, 32, max_duration=3)
        starts = [(r.t_start, r.t_end) for r in inst.reservations]
        assert starts == sorted(starts)
        assert all(1 <= r.duration <= 3 for r in inst.reservations)
        assert [r.id for r in inst.reservations] == list(range(30))

    def test_no_reservations(self):
        inst = generator.generate(0, 1, 0, 4)
        assert inst.reservations == ()

    @pytest.mark.parametrize("kwargs", [
        {"n_vehicles": 0},
        {"n_reservations": -1},
        {"t_max": 0},
    ])
    def test_rejects_bad_sizes(self, kwargs):
        args = {"seed": 0, "n_vehicles": 1, "n_reservations": 2, "t_max": 8, **kwargs}
        with pytest.raises(ValueError):
            generator.generate(**args)

    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            generator.generate(0, 1, 1, 8, levels=2, charge_levels=3)
