"""
DSO Agent
Raises the scenario's congestion events at their configured ticks
"""

import logging
from collections.abc import Sequence

from pydantic import Field, model_validator

from gridchain.contracts.models import Direction, Frozen

logger = logging.getLogger(__name__)


class CongestionSignal(Frozen):
    """A congestion point that needs flexibility over a window of slots"""

    tick: int = Field(ge=0)
    congestion_point: str = Field(min_length=1)
    required_flex_wh: int = Field(gt=0)
    window_start: int = Field(ge=0)
    window_end: int
    direction: Direction = Direction.REDUCE
    incentive_rate: int = Field(default=200, ge=0)
    penalty_rate: int = Field(default=100, ge=0)

    @model_validator(mode="after")
    def _check_window(self) -> "CongestionSignal":
        if self.window_start >= self.window_end:
            raise ValueError("congestion window must satisfy start < end")
        return self


class DSOAgent:
    def __init__(self, events: Sequence[CongestionSignal]) -> None:
        self.events = sorted(events, key=lambda e: (e.tick, e.congestion_point, e.window_start))

    def step(self, tick: int) -> list[CongestionSignal]:
        due = [e for e in self.events if e.tick == tick]
        for signal in due:
            logger.info(
                f"DSO congestion at {signal.congestion_point}: {signal.required_flex_wh} Wh "
                f"{signal.direction.value} over slots [{signal.window_start}, {signal.window_end})"
            )
        return due
