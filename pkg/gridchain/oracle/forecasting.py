"""
Seasonal-naive forecasting at day-ahead and intra-day granularity
"""

from collections.abc import Sequence

import numpy as np

from gridchain.errors import InsufficientHistoryError, OracleServiceError
from gridchain.oracle.models import Forecast, Horizon


def resample(series: Sequence[int], from_slots_per_day: int, to_slots_per_day: int) -> list[int]:
    """Convert between hourly and half-hourly series without losing Wh"""
    if from_slots_per_day == to_slots_per_day:
        return list(series)
    values = np.asarray(series, dtype=np.int64)
    if (from_slots_per_day, to_slots_per_day) == (24, 48):
        # Even split, the odd Wh goes to the first half
        second = values // 2
        first = values - second
        return np.column_stack((first, second)).ravel().tolist()
    if (from_slots_per_day, to_slots_per_day) == (48, 24):
        usable = len(values) - len(values) % 2
        return values[:usable].reshape(-1, 2).sum(axis=1).tolist()
    raise OracleServiceError(
        f"cannot resample {from_slots_per_day} to {to_slots_per_day} slots per day"
    )


def forecast(history: Sequence[int], horizon: Horizon, from_slot: int | None = None) -> Forecast:
    """Predict each step as the value observed exactly one day earlier"""
    period = horizon.slots_per_day
    if len(history) < period:
        raise InsufficientHistoryError(
            f"{horizon.value} forecast needs {period} values of history, got {len(history)}"
        )
    last_day = np.asarray(history[-period:], dtype=np.int64)
    return Forecast(
        horizon=horizon,
        from_slot=len(history) if from_slot is None else from_slot,
        granularity_minutes=24 * 60 // period,
        values=tuple(int(v) for v in last_day[: horizon.steps]),
    )
