"""
Transaction Bodies
Kind-specific payloads carried as canonical JSON inside transactions
"""

from typing import Annotated, Any, Literal, Union

from pydantic import BaseModel, Field, TypeAdapter

from gridchain.contracts.models import (
    ClearingResult,
    Direction,
    EnergyReading,
    Frozen,
    OracleServiceName,
    ServiceSpec,
    Side,
)
from gridchain.ledger.crypto import Address
from gridchain.ledger.primitives import TxKind


class MeterInit(Frozen):
    contract: Literal["meter"] = "meter"
    device_type: str = Field(min_length=1)
    measurement_type: str = Field(min_length=1)


class DRInit(Frozen):
    contract: Literal["dr"] = "dr"
    prosumer: Address
    meter: Address
    congestion_point: str
    baseline: tuple[int, ...]


class MarketInit(Frozen):
    contract: Literal["market"] = "market"


class VPPInit(Frozen):
    contract: Literal["vpp"] = "vpp"


DeployBody = Annotated[
    Union[MeterInit, DRInit, MarketInit, VPPInit],
    Field(discriminator="contract"),
]
DEPLOY_ADAPTER: TypeAdapter[Any] = TypeAdapter(DeployBody)


class IssueOrderBody(Frozen):
    window_start: int
    window_end: int
    direction: Direction
    amount_wh: int
    incentive_rate: int
    penalty_rate: int
    congestion_point: str


class DRSettleBody(Frozen):
    order_id: int
    metered: tuple[EnergyReading, ...]


class SubmitOrderBody(Frozen):
    """Order as submitted; quantity and price are checked by the contract"""

    side: Side
    owner: Address
    qty_wh: int
    limit_price: int
    slot: int


class RegisterAssetBody(Frozen):
    owner: Address
    meter: Address
    baseline: tuple[int, ...]
    capacity_wh_per_slot: int
    response_time_slots: int
    sync_time_slots: int
    max_dispatch_slots: int
    band: str = ""
    cost_rate: int


class DispatchAllocation(Frozen):
    asset_id: int
    scheduled_wh: int


class DispatchBody(Frozen):
    service: ServiceSpec
    window_start: int
    members: tuple[DispatchAllocation, ...]


class DeliveredEnergy(Frozen):
    asset_id: int
    delivered_wh: int


class VPPSettleBody(Frozen):
    service_id: str
    delivered: tuple[DeliveredEnergy, ...]


class OracleRequestBody(Frozen):
    service: OracleServiceName
    criteria: str = "min-cost"
    target: Address | None = None
    params: dict[str, Any] = Field(default_factory=dict)


class OracleResponseBody(Frozen):
    request_id: int
    ok: bool
    result: dict[str, Any] | None = None
    error: str | None = None


PAYLOAD_MODELS: dict[TxKind, type[BaseModel]] = {
    TxKind.METER_UPDATE: EnergyReading,
    TxKind.DR_ISSUE_ORDER: IssueOrderBody,
    TxKind.DR_SETTLE: DRSettleBody,
    TxKind.MARKET_SUBMIT_ORDER: SubmitOrderBody,
    TxKind.MARKET_RECORD_CLEARING: ClearingResult,
    TxKind.VPP_REGISTER_ASSET: RegisterAssetBody,
    TxKind.VPP_RECORD_DISPATCH: DispatchBody,
    TxKind.VPP_SETTLE: VPPSettleBody,
    TxKind.ORACLE_REQUEST: OracleRequestBody,
    TxKind.ORACLE_RESPONSE: OracleResponseBody,
}


def decode_payload(kind: TxKind, payload: bytes) -> Any:
    """Parse a transaction payload into its typed body"""
    if kind is TxKind.DEPLOY:
        return DEPLOY_ADAPTER.validate_json(payload)
    return PAYLOAD_MODELS[kind].model_validate_json(payload)
