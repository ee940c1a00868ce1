"""
Oracle Data Models
Service inputs and results, and the request parameter schemas carried on-chain
"""

from enum import Enum

from pydantic import Field, model_validator

from gridchain.contracts.models import Direction, Frozen, ServiceSpec
from gridchain.ledger.crypto import Address


class Horizon(str, Enum):
    DAY_AHEAD = "day-ahead"
    INTRA_DAY = "intra-day"

    @property
    def steps(self) -> int:
        return 24 if self is Horizon.DAY_AHEAD else 8

    @property
    def slots_per_day(self) -> int:
        """Native resolution: hourly for day-ahead, half-hourly for intra-day"""
        return 24 if self is Horizon.DAY_AHEAD else 48


class Forecast(Frozen):
    horizon: Horizon
    from_slot: int = 0
    granularity_minutes: int
    values: tuple[int, ...]


# ============================================================================
# OPTIMIZERS
# ============================================================================


class FlexCandidate(Frozen):
    id: str
    flex_wh: int = Field(gt=0)
    cost: int = Field(ge=0)


class FlexSelection(Frozen):
    target_wh: int
    feasible: bool
    # False when the greedy fallback produced the selection
    optimal: bool = True
    chosen: tuple[str, ...] = ()
    total_wh: int = 0
    total_cost: int = 0


class CoalitionMember(Frozen):
    asset_id: int
    scheduled_wh: int


class CoalitionPlan(Frozen):
    service: ServiceSpec
    feasible: bool
    optimal: bool = True
    members: tuple[CoalitionMember, ...] = ()
    total_scheduled_wh: int = 0
    total_cost: int = 0
    # asset id -> the constraint it failed
    excluded: dict[int, str] = Field(default_factory=dict)


# ============================================================================
# ON-CHAIN REQUEST PARAMETERS
# ============================================================================


class ForecastParams(Frozen):
    device: Address
    horizon: Horizon
    from_slot: int = Field(ge=0)


class ClearParams(Frozen):
    slot: int = Field(ge=0)


class FlexParams(Frozen):
    """A DSO congestion signal turned into a flexibility procurement"""

    congestion_point: str
    window_start: int
    window_end: int
    target_wh: int = Field(ge=0)
    candidates: tuple[FlexCandidate, ...]
    direction: Direction = Direction.REDUCE
    incentive_rate: int = Field(default=0, ge=0)
    penalty_rate: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_window(self) -> "FlexParams":
        if self.window_start >= self.window_end:
            raise ValueError("flexibility window must satisfy start < end")
        return self


class CoalitionParams(Frozen):
    service: ServiceSpec
    window_start: int


class BaselineParams(Frozen):
    device: Address
    # History before this slot is used
    before_slot: int = Field(gt=0)
    dr_windows: tuple[tuple[int, int], ...] = ()
