"""
Baseline profile from the most recent days without demand-response activity
"""

from collections.abc import Sequence

import numpy as np

from gridchain.contracts.models import BaselineProfile
from gridchain.errors import InsufficientHistoryError

CLEAN_DAYS = 3


def clean_days(
    history_len: int, dr_windows: Sequence[tuple[int, int]], slots_per_day: int
) -> list[int]:
    """Indices of complete days that no DR window touches, oldest first"""
    days = []
    for day in range(history_len // slots_per_day):
        start, end = day * slots_per_day, (day + 1) * slots_per_day
        if not any(w_start < end and start < w_end for w_start, w_end in dr_windows):
            days.append(day)
    return days


def compute_baseline(
    history: Sequence[int],
    dr_windows: Sequence[tuple[int, int]] = (),
    slots_per_day: int = 24,
) -> BaselineProfile:
    """Floored per-slot mean over the three most recent clean days"""
    days = clean_days(len(history), dr_windows, slots_per_day)
    if len(days) < CLEAN_DAYS:
        raise InsufficientHistoryError(
            f"baseline needs {CLEAN_DAYS} clean days, history has {len(days)}"
        )
    usable = len(history) // slots_per_day * slots_per_day
    by_day = np.asarray(history[:usable], dtype=np.int64).reshape(-1, slots_per_day)
    recent = by_day[days[-CLEAN_DAYS:]]
    return BaselineProfile(slot_wh=tuple(int(v) for v in recent.sum(axis=0) // CLEAN_DAYS))
