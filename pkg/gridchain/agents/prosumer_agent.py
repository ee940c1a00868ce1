"""
Prosumer Agent
A simulated prosumer and its smart meter sharing one key pair: meters net
energy, trades surplus and deficit on the P2P market, follows demand-response
and VPP obligations, and registers its flexible asset with the VPP
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from fractions import Fraction
from types import MappingProxyType
from typing import Annotated, Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    WithJsonSchema,
    model_validator,
)

from gridchain.contracts.models import (
    Direction,
    EnergyReading,
    MarketContractState,
    Side,
)
from gridchain.contracts.payloads import MeterInit, RegisterAssetBody, SubmitOrderBody
from gridchain.ledger.crypto import NULL_ADDRESS, Address, KeyPair, contract_address, create_account
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Transaction, TxKind, make_transaction

logger = logging.getLogger(__name__)


def _parse_fraction(value: Any) -> Fraction:
    if isinstance(value, bool):
        raise ValueError("compliance must be a number or a ratio string")
    if isinstance(value, Fraction):
        return value
    try:
        return Fraction(str(value).strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"{value!r} is not a rational number") from e


Ratio = Annotated[
    Fraction,
    PlainValidator(_parse_fraction),
    PlainSerializer(lambda f: str(f), return_type=str),
    WithJsonSchema(
        {
            "anyOf": [
                {"type": "number"},
                {"type": "string", "pattern": r"^\s*-?\d+(\s*/\s*\d+)?\s*$"},
            ]
        }
    ),
]


class AssetParams(BaseModel):
    """Flexible asset a prosumer offers to the VPP"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Defaults to the prosumer's flexibility capacity
    capacity_wh_per_slot: int | None = Field(default=None, gt=0)
    response_time_slots: int = Field(ge=0)
    sync_time_slots: int = Field(default=0, ge=0)
    max_dispatch_slots: int = Field(gt=0)
    band: str = ""
    cost_rate: int = Field(ge=0)


class ProsumerConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    # 32-byte hex seed; the harness derives one from the id and run seed when absent
    account_seed: str | None = Field(default=None, pattern="^[0-9a-f]{64}$")
    consumption_trace: tuple[int, ...] = ()
    generation_trace: tuple[int, ...] = ()
    bid_price: int = Field(default=300, ge=0)
    ask_price: int = Field(default=200, ge=0)
    dr_compliance: Ratio = Fraction(1)
    flex_capacity_wh: int = Field(default=0, ge=0)
    # Milli-currency per kWh the aggregator expects to pay for this prosumer's flexibility
    flex_cost_rate: int = Field(default=100, ge=0)
    congestion_point: str = "cp-1"
    asset: AssetParams | None = None
    strategy: Literal["naive"] = "naive"

    @model_validator(mode="after")
    def _check(self) -> "ProsumerConfig":
        if len(self.consumption_trace) != len(self.generation_trace):
            raise ValueError(f"prosumer {self.id}: traces differ in length")
        if any(v < 0 for v in (*self.consumption_trace, *self.generation_trace)):
            raise ValueError(f"prosumer {self.id}: trace values must be non-negative")
        if not 0 <= self.dr_compliance <= 1:
            raise ValueError(f"prosumer {self.id}: dr_compliance must lie in [0, 1]")
        return self

    @property
    def slots(self) -> int:
        return len(self.consumption_trace)

    @property
    def asset_capacity_wh(self) -> int:
        if self.asset is None:
            return 0
        return self.asset.capacity_wh_per_slot or self.flex_capacity_wh

    def key(self) -> KeyPair:
        if self.account_seed is None:
            raise ValueError(f"prosumer {self.id} has no account seed")
        return create_account(bytes.fromhex(self.account_seed))[0]

    def trace_net(self, slot: int) -> int:
        return self.consumption_trace[slot] - self.generation_trace[slot]


@dataclass(frozen=True)
class Obligation:
    """A load adjustment the prosumer has been asked for, from DR or a VPP dispatch"""

    source: Literal["dr", "vpp"]
    contract: Address
    reference: str
    window_start: int
    window_end: int
    direction: Direction
    amount_wh: int

    def active(self, slot: int) -> bool:
        return self.window_start <= slot < self.window_end


@dataclass(frozen=True)
class ProsumerState:
    next_nonce: int = 0
    meter: Address | None = None
    obligations: tuple[Obligation, ...] = ()
    open_order_ids: tuple[int, ...] = ()
    asset_submitted: bool = False
    # Local mirror of on-chain earnings by source, reconciled at audit
    earnings: Mapping[str, int] = field(
        default_factory=lambda: MappingProxyType({"market": 0, "dr": 0, "vpp": 0})
    )

    @property
    def total_earnings(self) -> int:
        return sum(self.earnings.values())


# ============================================================================
# CHAIN READING
# ============================================================================


def read_obligations(view: ChainView, me: Address) -> tuple[Obligation, ...]:
    obligations = []
    for address, dr in view.contracts_of("dr"):
        if dr.prosumer != me:
            continue
        for order in dr.orders:
            obligations.append(
                Obligation(
                    source="dr",
                    contract=address,
                    reference=str(order.id),
                    window_start=order.window_start,
                    window_end=order.window_end,
                    direction=order.direction,
                    amount_wh=order.amount_wh,
                )
            )
    for address, vpp in view.contracts_of("vpp"):
        for dispatch in vpp.dispatches:
            for member in dispatch.members:
                if member.owner == me:
                    obligations.append(
                        Obligation(
                            source="vpp",
                            contract=address,
                            reference=dispatch.service_id,
                            window_start=dispatch.window_start,
                            window_end=dispatch.window_end,
                            direction=Direction.REDUCE,
                            amount_wh=member.scheduled_wh,
                        )
                    )
    return tuple(obligations)


def read_earnings(view: ChainView, me: Address) -> dict[str, int]:
    earnings = {"market": 0, "dr": 0, "vpp": 0}
    for _, market in view.contracts_of("market"):
        for trade in market.trades:
            if trade.seller == me:
                earnings["market"] += trade.payment
            if trade.buyer == me:
                earnings["market"] -= trade.payment
    for _, dr in view.contracts_of("dr"):
        if dr.prosumer == me:
            earnings["dr"] += sum(s.net for s in dr.settlements)
    for _, vpp in view.contracts_of("vpp"):
        for settlement in vpp.settlements:
            earnings["vpp"] += sum(m.net for m in settlement.members if m.owner == me)
    return earnings


def answered_baseline(view: ChainView, meter: Address) -> tuple[int, ...] | None:
    """Most recent answered baseline for ``meter``, if any"""
    found = None
    for record in view.world.oracle_requests.values():
        if (
            record.service == "baseline"
            and record.status == "answered"
            and record.params.get("device") == meter.hex()
            and record.result is not None
        ):
            if found is None or record.id > found.id:
                found = record
    return tuple(found.result["slot_wh"]) if found is not None else None


def adjustment(
    obligations: tuple[Obligation, ...], slot: int, compliance: Fraction, capacity_wh: int
) -> int:
    """Signed change to metered energy: reductions lower it, increases raise it"""
    change = 0
    for direction, sign in ((Direction.REDUCE, -1), (Direction.INCREASE, 1)):
        requested = sum(
            o.amount_wh for o in obligations if o.direction is direction and o.active(slot)
        )
        # floor() of a non-negative Fraction
        change += sign * int(compliance * min(requested, capacity_wh))
    return change


def _market(view: ChainView) -> tuple[Address, MarketContractState] | None:
    return next(iter(view.contracts_of("market")), None)


# ============================================================================
# STEP
# ============================================================================


def prosumer_step(
    config: ProsumerConfig, state: ProsumerState, tick: int, view: ChainView
) -> tuple[ProsumerState, list[Transaction]]:
    """One tick of a prosumer: meter slot ``tick``, trade it, follow obligations"""
    key = config.key()
    me = key.address
    nonce = state.next_nonce
    transactions: list[Transaction] = []

    def emit(receiver: Address, kind: TxKind, body: BaseModel) -> None:
        nonlocal nonce
        transactions.append(make_transaction(key, receiver, nonce, kind, body))
        nonce += 1

    meter = state.meter
    if meter is None:
        meter = contract_address(me, nonce)
        emit(NULL_ADDRESS, TxKind.DEPLOY, MeterInit(device_type="smart-meter", measurement_type="energy"))

    obligations = read_obligations(view, me)
    market = _market(view)

    if tick < config.slots:
        net = config.trace_net(tick) + adjustment(
            obligations, tick, config.dr_compliance, config.flex_capacity_wh
        )
        emit(meter, TxKind.METER_UPDATE, EnergyReading(slot=tick, energy_wh=net, device=meter))

        if market is not None and net != 0 and tick not in market[1].cleared_slots:
            side, price = (Side.BID, config.bid_price) if net > 0 else (Side.OFFER, config.ask_price)
            emit(
                market[0],
                TxKind.MARKET_SUBMIT_ORDER,
                SubmitOrderBody(side=side, owner=me, qty_wh=abs(net), limit_price=price, slot=tick),
            )

    asset_submitted = state.asset_submitted
    if config.asset is not None and not asset_submitted and state.meter is not None:
        vpp = next(iter(view.contracts_of("vpp")), None)
        baseline = answered_baseline(view, state.meter)
        if vpp is not None and baseline is not None:
            asset = config.asset
            emit(
                vpp[0],
                TxKind.VPP_REGISTER_ASSET,
                RegisterAssetBody(
                    owner=me,
                    meter=state.meter,
                    baseline=baseline,
                    capacity_wh_per_slot=config.asset_capacity_wh,
                    response_time_slots=asset.response_time_slots,
                    sync_time_slots=asset.sync_time_slots,
                    max_dispatch_slots=asset.max_dispatch_slots,
                    band=asset.band,
                    cost_rate=asset.cost_rate,
                ),
            )
            asset_submitted = True
            logger.debug(f"[{config.id}] registering asset with VPP {vpp[0].short()}")

    open_ids = tuple(o.id for o in market[1].open_orders if o.owner == me) if market else ()
    updated = replace(
        state,
        next_nonce=nonce,
        meter=meter,
        obligations=obligations,
        open_order_ids=open_ids,
        asset_submitted=asset_submitted,
        earnings=MappingProxyType(read_earnings(view, me)),
    )
    return updated, transactions


class ProsumerAgent:
    """Holds one prosumer's config and state across ticks"""

    def __init__(self, config: ProsumerConfig) -> None:
        self.config = config
        self.state = ProsumerState()
        self.address = config.key().address

    def step(self, view: ChainView, tick: int) -> list[Transaction]:
        self.state, transactions = prosumer_step(self.config, self.state, tick, view)
        return transactions
