"""
Contract State Models
Typed, immutable states for the meter, demand-response, market and VPP
contracts, plus the oracle request registry record
"""

from enum import Enum
from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from gridchain.ledger.crypto import ZERO_HASH, Address


class Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Direction(str, Enum):
    REDUCE = "reduce"
    INCREASE = "increase"


class Side(str, Enum):
    BID = "bid"
    OFFER = "offer"


# ============================================================================
# METER
# ============================================================================


class EnergyReading(Frozen):
    """Energy over one slot; positive = consumption, negative = net generation"""

    slot: int = Field(ge=0)
    energy_wh: int
    device: Address


class MeterMetadata(Frozen):
    device_type: str
    measurement_type: str
    unit: Literal["Wh"] = "Wh"
    owner: Address


class MeterContractState(Frozen):
    kind: Literal["meter"] = "meter"
    metadata: MeterMetadata
    latest: EnergyReading | None = None
    readings_root: str = ZERO_HASH.hex()
    count: int = 0


# ============================================================================
# DEMAND RESPONSE
# ============================================================================


class BaselineProfile(Frozen):
    """Expected energy per slot-of-day outside any DR program"""

    slot_wh: tuple[int, ...]

    def at(self, slot: int) -> int:
        return self.slot_wh[slot % len(self.slot_wh)]


class FlexibilityOrder(Frozen):
    id: int
    window_start: int
    window_end: int
    direction: Direction
    amount_wh: int = Field(gt=0)
    incentive_rate: int = Field(ge=0)
    penalty_rate: int = Field(ge=0)
    congestion_point: str
    # Baseline frozen at issuance, one value per window slot
    baseline_wh: tuple[int, ...]
    issued_tick: int

    @model_validator(mode="after")
    def _check_window(self) -> "FlexibilityOrder":
        if self.window_start >= self.window_end:
            raise ValueError("order window must satisfy start < end")
        if len(self.baseline_wh) != self.window_end - self.window_start:
            raise ValueError("frozen baseline must cover the window")
        return self

    @property
    def slots(self) -> range:
        return range(self.window_start, self.window_end)

    @property
    def ordered_total_wh(self) -> int:
        return self.amount_wh * len(self.slots)

    def overlaps(self, start: int, end: int) -> bool:
        return self.window_start < end and start < self.window_end


class Settlement(Frozen):
    order_id: int
    delivered_wh: int
    shortfall_wh: int
    reward: int
    penalty: int
    net: int
    settled_tick: int


class DRContractState(Frozen):
    kind: Literal["dr"] = "dr"
    prosumer: Address
    aggregator: Address
    meter: Address
    congestion_point: str
    baseline: BaselineProfile
    orders: tuple[FlexibilityOrder, ...] = ()
    settlements: tuple[Settlement, ...] = ()
    next_order_id: int = 0

    def order(self, order_id: int) -> FlexibilityOrder | None:
        return next((o for o in self.orders if o.id == order_id), None)

    def is_settled(self, order_id: int) -> bool:
        return any(s.order_id == order_id for s in self.settlements)


# ============================================================================
# MARKET
# ============================================================================


class Order(Frozen):
    id: int
    side: Side
    owner: Address
    qty_wh: int = Field(gt=0)
    limit_price: int = Field(ge=0)
    slot: int = Field(ge=0)


class Match(Frozen):
    bid_id: int
    offer_id: int
    qty_wh: int


class ClearingResult(Frozen):
    slot: int
    clearing_price: int
    matches: tuple[Match, ...] = ()
    total_qty_wh: int = 0


class Trade(Frozen):
    slot: int
    buyer: Address
    seller: Address
    bid_id: int
    offer_id: int
    qty_wh: int
    price: int
    payment: int


class MarketContractState(Frozen):
    kind: Literal["market"] = "market"
    operator: Address
    open_orders: tuple[Order, ...] = ()
    clearings: tuple[ClearingResult, ...] = ()
    trades: tuple[Trade, ...] = ()
    cleared_slots: tuple[int, ...] = ()
    next_order_id: int = 0

    def orders_for(self, slot: int) -> list[Order]:
        return [o for o in self.open_orders if o.slot == slot]


# ============================================================================
# VIRTUAL POWER PLANT
# ============================================================================


class AssetRecord(Frozen):
    asset_id: int
    owner: Address
    meter: Address
    baseline: BaselineProfile
    capacity_wh_per_slot: int = Field(gt=0)
    response_time_slots: int = Field(ge=0)
    sync_time_slots: int = Field(ge=0)
    max_dispatch_slots: int = Field(gt=0)
    band: str = ""
    cost_rate: int = Field(ge=0)


class ServiceSpec(Frozen):
    """A flexibility service the VPP is asked to deliver"""

    service_id: str
    capacity_wh_per_slot: int = Field(gt=0)
    max_response_slots: int = Field(ge=0)
    max_sync_slots: int | None = None
    dispatch_slots: int = Field(gt=0)
    price_rate: int = Field(ge=0)
    penalty_rate: int = Field(ge=0)
    band: str | None = None

    def admits(self, asset: AssetRecord) -> str | None:
        """Return why ``asset`` cannot serve, or None when it can"""
        if asset.response_time_slots > self.max_response_slots:
            return "response-time"
        if asset.max_dispatch_slots < self.dispatch_slots:
            return "dispatch-period"
        if self.max_sync_slots is not None and asset.sync_time_slots > self.max_sync_slots:
            return "sync-time"
        if self.band is not None and asset.band != self.band:
            return "band"
        return None


class DispatchMember(Frozen):
    asset_id: int
    owner: Address
    scheduled_wh: int
    delivered_wh: int | None = None


class DispatchRecord(Frozen):
    service: ServiceSpec
    window_start: int
    window_end: int
    members: tuple[DispatchMember, ...]
    recorded_tick: int

    @property
    def service_id(self) -> str:
        return self.service.service_id

    def overlaps(self, start: int, end: int) -> bool:
        return self.window_start < end and start < self.window_end


class MemberSettlement(Frozen):
    asset_id: int
    owner: Address
    scheduled_wh: int
    delivered_wh: int
    credited_wh: int
    shortfall_wh: int
    payout: int
    penalty: int
    net: int


class VPPSettlement(Frozen):
    service_id: str
    members: tuple[MemberSettlement, ...]
    total_payout: int
    total_penalty: int
    settled_tick: int


class VPPContractState(Frozen):
    kind: Literal["vpp"] = "vpp"
    operator: Address
    assets: tuple[AssetRecord, ...] = ()
    dispatches: tuple[DispatchRecord, ...] = ()
    settlements: tuple[VPPSettlement, ...] = ()

    def asset(self, asset_id: int) -> AssetRecord | None:
        return next((a for a in self.assets if a.asset_id == asset_id), None)

    def dispatch(self, service_id: str) -> DispatchRecord | None:
        return next((d for d in self.dispatches if d.service_id == service_id), None)


ContractState = Annotated[
    Union[MeterContractState, DRContractState, MarketContractState, VPPContractState],
    Field(discriminator="kind"),
]

KIND_TAGS: dict[str, int] = {"meter": 1, "dr": 2, "market": 3, "vpp": 4}


# ============================================================================
# ORACLE REGISTRY
# ============================================================================

OracleServiceName = Literal["forecast", "clear", "flex", "coalition", "baseline"]
RequestStatus = Literal["pending", "answered", "failed", "rejected"]


class OracleRequestRecord(Frozen):
    id: int
    requester: Address
    service: OracleServiceName
    criteria: str
    target: Address | None = None
    params: dict[str, Any]
    height: int
    tick: int
    status: RequestStatus = "pending"
    result: dict[str, Any] | None = None
    error: str | None = None
    answered_height: int | None = None
