"""
Tests for the seasonal-naive forecaster, resampling and baseline profiles
"""

import pytest

from gridchain.errors import InsufficientHistoryError, OracleServiceError
from gridchain.oracle.baseline import CLEAN_DAYS, clean_days, compute_baseline
from gridchain.oracle.forecasting import forecast, resample
from gridchain.oracle.models import Horizon

pytestmark = pytest.mark.unit

DAY = [800 + 40 * h for h in range(24)]


class TestForecast:
    @pytest.mark.parametrize(
        "horizon, history_len, steps, minutes",
        [(Horizon.DAY_AHEAD, 72, 24, 60), (Horizon.INTRA_DAY, 96, 8, 30)],
    )
    def test_output_shape(self, horizon, history_len, steps, minutes):
        result = forecast(list(range(history_len)), horizon)
        assert len(result.values) == steps
        assert result.granularity_minutes == minutes
        assert result.from_slot == history_len

    def test_constant_history_is_a_fixed_point(self):
        result = forecast([1234] * 48, Horizon.DAY_AHEAD)
        assert set(result.values) == {1234}

    def test_periodic_history_repeats_the_last_day(self):
        result = forecast(DAY * 3, Horizon.DAY_AHEAD)
        assert list(result.values) == DAY

    def test_intra_day_takes_the_next_four_hours(self):
        half_hourly = resample(DAY * 2, 24, 48)
        result = forecast(half_hourly, Horizon.INTRA_DAY)
        assert list(result.values) == half_hourly[-48:][:8]

    def test_same_history_same_forecast(self):
        history = [(7 * i) % 500 for i in range(100)]
        assert forecast(history, Horizon.DAY_AHEAD) == forecast(history, Horizon.DAY_AHEAD)

    def test_short_history_is_refused(self):
        with pytest.raises(InsufficientHistoryError):
            forecast([1] * 23, Horizon.DAY_AHEAD)


class TestResample:
    def test_hourly_to_half_hourly_keeps_every_wh(self):
        assert resample([3, 10, -5], 24, 48) == [2, 1, 5, 5, -2, -3]

    def test_half_hourly_to_hourly_sums_pairs(self):
        assert resample([2, 1, 5, 5, 7], 48, 24) == [3, 10]

    def test_same_resolution_is_a_copy(self):
        assert resample([1, 2], 24, 24) == [1, 2]

    def test_unsupported_resolution(self):
        with pytest.raises(OracleServiceError):
            resample([1], 24, 96)


class TestBaseline:
    def test_identical_days_give_the_day(self):
        assert compute_baseline(DAY * 3).slot_wh == tuple(DAY)

    def test_mean_of_three_days(self):
        history = [900] * 24 + [1000] * 24 + [1100] * 24
        assert set(compute_baseline(history).slot_wh) == {1000}

    def test_mean_is_floored(self):
        history = [1] * 24 + [1] * 24 + [2] * 24
        assert set(compute_baseline(history).slot_wh) == {1}

    def test_two_clean_days_are_not_enough(self):
        with pytest.raises(InsufficientHistoryError):
            compute_baseline([500] * 48)

    def test_days_touched_by_dr_are_skipped(self):
        history = [900] * 24 + [1000] * 24 + [1100] * 24 + [5] * 24
        # Day 3 had a DR window, so the three days before it are used
        profile = compute_baseline(history, dr_windows=[(80, 82)])
        assert set(profile.slot_wh) == {1000}
        assert clean_days(len(history), [(80, 82)], 24) == [0, 1, 2]

    def test_only_the_most_recent_clean_days_count(self):
        history = [0] * 24 + [300] * 24 * CLEAN_DAYS
        assert set(compute_baseline(history).slot_wh) == {300}

    def test_dr_window_can_leave_too_few_days(self):
        with pytest.raises(InsufficientHistoryError):
            compute_baseline([1] * 72, dr_windows=[(30, 31)])

    def test_partial_trailing_day_is_ignored(self):
        history = [700] * 72 + [1] * 10
        assert set(compute_baseline(history).slot_wh) == {700}

    def test_half_hourly_days(self):
        profile = compute_baseline([50] * 48 * 3, slots_per_day=48)
        assert len(profile.slot_wh) == 48
