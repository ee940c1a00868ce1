"""
Energy Traces
Loading, validating and synthesizing per-prosumer consumption and generation
series. CSV layout: prosumer_id,slot,consumption_wh,generation_wh
"""

import logging
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from gridchain.errors import TraceFormatError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["prosumer_id", "slot", "consumption_wh", "generation_wh"]
VALUE_COLUMNS = ["slot", "consumption_wh", "generation_wh"]


@dataclass(frozen=True)
class TraceSeries:
    consumption_wh: tuple[int, ...]
    generation_wh: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.consumption_wh) != len(self.generation_wh):
            raise TraceFormatError("consumption and generation traces differ in length")

    def __len__(self) -> int:
        return len(self.consumption_wh)

    def net(self, slot: int) -> int:
        """Consumption minus generation; negative means surplus"""
        return self.consumption_wh[slot] - self.generation_wh[slot]


def _integer_column(frame: pd.DataFrame, column: str) -> pd.Series:
    values = pd.to_numeric(frame[column], errors="coerce")
    bad = values.isna() | (values != values.round())
    if bad.any():
        row = int(bad.idxmax())
        raise TraceFormatError(
            f"row {row + 2}: {column} value {frame[column].iloc[row]!r} is not an integer"
        )
    return values.astype(np.int64)


def load_traces(path: str | Path) -> dict[str, TraceSeries]:
    """Read a trace CSV into gap-free series keyed by prosumer id"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TraceFormatError(f"cannot read traces from {path}: {e}") from e

    if list(frame.columns) != TRACE_COLUMNS:
        raise TraceFormatError(
            f"trace header must be {','.join(TRACE_COLUMNS)}, got {','.join(frame.columns)}"
        )
    for column in VALUE_COLUMNS:
        frame[column] = _integer_column(frame, column)

    for column in VALUE_COLUMNS:
        negative = frame[column] < 0
        if negative.any():
            row = int(negative.idxmax())
            raise TraceFormatError(f"row {row + 2}: {column} must be non-negative")

    duplicated = frame.duplicated(subset=["prosumer_id", "slot"])
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise TraceFormatError(f"duplicate row for prosumer {row.prosumer_id} slot {row.slot}")

    traces: dict[str, TraceSeries] = {}
    for prosumer_id, rows in frame.groupby("prosumer_id", sort=True):
        rows = rows.sort_values("slot")
        slots = rows["slot"].to_numpy()
        expected = np.arange(len(slots))
        if not np.array_equal(slots, expected):
            missing = int(expected[np.argmax(slots != expected)])
            raise TraceFormatError(f"prosumer {prosumer_id} is missing slot {missing}")
        traces[str(prosumer_id)] = TraceSeries(
            consumption_wh=tuple(int(v) for v in rows["consumption_wh"]),
            generation_wh=tuple(int(v) for v in rows["generation_wh"]),
        )

    logger.info(f"Loaded traces for {len(traces)} prosumers from {path}")
    return traces


def synthesize_traces(
    prosumer_ids: list[str], slots: int, slots_per_day: int = 24, seed: int = 0
) -> dict[str, TraceSeries]:
    """Deterministic day-periodic traces: an evening load peak and a midday solar bump"""
    rng = random.Random(seed)
    hours = (np.arange(slots_per_day) + 0.5) * 24 / slots_per_day
    traces = {}
    for prosumer_id in prosumer_ids:
        base = rng.randint(300, 700) * 24 // slots_per_day
        peak = rng.randint(800, 2000) * 24 // slots_per_day
        solar = rng.choice([0, 1500, 2500, 4000]) * 24 // slots_per_day
        load = base + peak * np.exp(-((hours - 19.0) ** 2) / 6.0)
        pv = solar * np.clip(np.sin((hours - 6.0) / 12.0 * np.pi), 0.0, None)
        day_load = np.floor(load).astype(np.int64)
        day_pv = np.floor(pv).astype(np.int64)
        days = -(-slots // slots_per_day)
        traces[prosumer_id] = TraceSeries(
            consumption_wh=tuple(int(v) for v in np.tile(day_load, days)[:slots]),
            generation_wh=tuple(int(v) for v in np.tile(day_pv, days)[:slots]),
        )
    return traces


def write_traces(path: str | Path, traces: dict[str, TraceSeries]) -> None:
    rows = [
        (prosumer_id, slot, series.consumption_wh[slot], series.generation_wh[slot])
        for prosumer_id, series in sorted(traces.items())
        for slot in range(len(series))
    ]
    pd.DataFrame(rows, columns=TRACE_COLUMNS).to_csv(path, index=False, lineterminator="\n")
