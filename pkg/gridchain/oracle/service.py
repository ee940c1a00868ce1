"""
Oracle Service
Watches a chain snapshot for pending requests, dispatches each to its
service handler and signs one response per request
"""

import logging
from collections.abc import Callable
from typing import Any

from pydantic import BaseModel, Field, ValidationError

from gridchain.contracts.models import (
    AssetRecord,
    BaselineProfile,
    MarketContractState,
    OracleRequestRecord,
    Order,
    ServiceSpec,
    Side,
    VPPContractState,
)
from gridchain.contracts.payloads import OracleResponseBody
from gridchain.errors import OracleServiceError
from gridchain.ledger.crypto import NULL_ADDRESS, Address, KeyPair
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Transaction, TxKind, make_transaction
from gridchain.oracle.baseline import compute_baseline
from gridchain.oracle.clearing import clear_market
from gridchain.oracle.coalition import form_coalition
from gridchain.oracle.flexibility import select_flexibility
from gridchain.oracle.forecasting import forecast, resample
from gridchain.oracle.models import (
    BaselineParams,
    ClearParams,
    CoalitionParams,
    FlexCandidate,
    FlexParams,
    ForecastParams,
    Horizon,
)

logger = logging.getLogger(__name__)

ServiceHandler = Callable[[OracleRequestRecord, ChainView], OracleResponseBody]


def _success(record: OracleRequestRecord, result: BaseModel) -> OracleResponseBody:
    return OracleResponseBody(request_id=record.id, ok=True, result=result.model_dump(mode="json"))


def _failure(
    record: OracleRequestRecord, error: str, result: BaseModel | None = None
) -> OracleResponseBody:
    return OracleResponseBody(
        request_id=record.id,
        ok=False,
        error=error,
        result=result.model_dump(mode="json") if result is not None else None,
    )


def _history(view: ChainView, device: Address, end: int) -> list[int]:
    series = view.reading_series(device, 0, end)
    if series is None:
        raise OracleServiceError(f"meter {device} has gaps before slot {end}")
    return series


def _answer_forecast(record: OracleRequestRecord, view: ChainView) -> OracleResponseBody:
    params = ForecastParams.model_validate(record.params)
    history = _history(view, params.device, params.from_slot)
    history = resample(history, view.genesis.slots_per_day, params.horizon.slots_per_day)
    return _success(record, forecast(history, params.horizon, params.from_slot))


def _answer_clear(record: OracleRequestRecord, view: ChainView) -> OracleResponseBody:
    params = ClearParams.model_validate(record.params)
    market = view.contract(record.target) if record.target else None
    if not isinstance(market, MarketContractState):
        raise OracleServiceError("clearing target is not a market")
    book = market.orders_for(params.slot)
    bids = [o for o in book if o.side is Side.BID]
    offers = [o for o in book if o.side is Side.OFFER]
    return _success(record, clear_market(bids, offers, params.slot))


def _answer_flex(record: OracleRequestRecord, view: ChainView) -> OracleResponseBody:
    params = FlexParams.model_validate(record.params)
    selection = select_flexibility(params.candidates, params.target_wh)
    if not selection.feasible:
        return _failure(record, "infeasible: not enough flexibility", selection)
    return _success(record, selection)


def _answer_coalition(record: OracleRequestRecord, view: ChainView) -> OracleResponseBody:
    params = CoalitionParams.model_validate(record.params)
    vpp = view.contract(record.target) if record.target else None
    if not isinstance(vpp, VPPContractState):
        raise OracleServiceError("coalition target is not a VPP")
    plan = form_coalition(vpp.assets, params.service)
    if not plan.feasible:
        return _failure(record, "infeasible: no coalition covers the service", plan)
    return _success(record, plan)


def _answer_baseline(record: OracleRequestRecord, view: ChainView) -> OracleResponseBody:
    params = BaselineParams.model_validate(record.params)
    history = _history(view, params.device, params.before_slot)
    profile = compute_baseline(history, params.dr_windows, view.genesis.slots_per_day)
    return _success(record, profile)


SERVICES: dict[str, ServiceHandler] = {
    "forecast": _answer_forecast,
    "clear": _answer_clear,
    "flex": _answer_flex,
    "coalition": _answer_coalition,
    "baseline": _answer_baseline,
}


def answer_request(record: OracleRequestRecord, view: ChainView) -> OracleResponseBody:
    """Compute the response to one request; service failures become failure responses"""
    try:
        return SERVICES[record.service](record, view)
    except ValidationError as e:
        error = f"malformed request: {e.error_count()} validation error(s)"
    except OracleServiceError as e:
        error = str(e)
    logger.warning(f"Oracle request {record.id} ({record.service}) failed: {error}")
    return _failure(record, error)


def oracle_step(view: ChainView, tick: int, oracle_key: KeyPair) -> list[Transaction]:
    """Signed responses to every pending request, ordered by request id

    Nonces follow the view, so the same view always yields the same bytes.
    """
    nonce = view.world.nonce_of(oracle_key.address)
    responses = []
    for record in view.world.pending_requests():
        body = answer_request(record, view)
        responses.append(
            make_transaction(oracle_key, oracle_key.address, nonce, TxKind.ORACLE_RESPONSE, body)
        )
        nonce += 1
    if responses:
        logger.debug(f"Tick {tick}: oracle answering {len(responses)} request(s)")
    return responses


class OracleService:
    """The standalone oracle process bound to the genesis oracle key"""

    def __init__(self, key: KeyPair) -> None:
        self.key = key
        self._emitted: set[bytes] = set()

    @property
    def address(self) -> Address:
        return self.key.address

    def step(self, view: ChainView, tick: int) -> list[Transaction]:
        if view.genesis.oracle != self.address:
            raise OracleServiceError("this key is not the genesis oracle")
        responses = oracle_step(view, tick, self.key)
        self._emitted.update(tx.hash for tx in responses)
        return responses

    @property
    def emitted(self) -> int:
        """Distinct response transactions produced so far"""
        return len(self._emitted)


# ============================================================================
# OFFLINE EVALUATION
# ============================================================================


class _BookEntry(BaseModel):
    id: int
    qty_wh: int = Field(gt=0)
    limit_price: int = Field(ge=0)
    owner: Address = NULL_ADDRESS


class _ClearInput(BaseModel):
    slot: int = 0
    bids: list[_BookEntry] = Field(default_factory=list)
    offers: list[_BookEntry] = Field(default_factory=list)

    def orders(self, side: Side) -> list[Order]:
        entries = self.bids if side is Side.BID else self.offers
        return [
            Order(
                id=e.id,
                side=side,
                owner=e.owner,
                qty_wh=e.qty_wh,
                limit_price=e.limit_price,
                slot=self.slot,
            )
            for e in entries
        ]


class _ForecastInput(BaseModel):
    history: list[int]
    horizon: Horizon


class _FlexInput(BaseModel):
    candidates: list[FlexCandidate]
    target_wh: int = Field(ge=0)


class _AssetInput(BaseModel):
    asset_id: int
    capacity_wh_per_slot: int = Field(gt=0)
    response_time_slots: int = Field(ge=0)
    sync_time_slots: int = Field(default=0, ge=0)
    max_dispatch_slots: int = Field(gt=0)
    band: str = ""
    cost_rate: int = Field(ge=0)

    def record(self) -> AssetRecord:
        return AssetRecord(
            owner=NULL_ADDRESS,
            meter=NULL_ADDRESS,
            baseline=BaselineProfile(slot_wh=(0,)),
            **self.model_dump(),
        )


class _CoalitionInput(BaseModel):
    assets: list[_AssetInput]
    service: ServiceSpec


class _BaselineInput(BaseModel):
    history: list[int]
    dr_windows: list[tuple[int, int]] = Field(default_factory=list)
    slots_per_day: int = Field(default=24, gt=0)


def evaluate_service(service: str, payload: dict[str, Any]) -> dict[str, Any]:
    """Run one service on a JSON-compatible input, away from any chain"""
    result: BaseModel
    if service == "forecast":
        data = _ForecastInput.model_validate(payload)
        result = forecast(data.history, data.horizon)
    elif service == "clear":
        book = _ClearInput.model_validate(payload)
        result = clear_market(book.orders(Side.BID), book.orders(Side.OFFER), book.slot)
    elif service == "flex":
        flex = _FlexInput.model_validate(payload)
        result = select_flexibility(flex.candidates, flex.target_wh)
    elif service == "coalition":
        coalition = _CoalitionInput.model_validate(payload)
        result = form_coalition([a.record() for a in coalition.assets], coalition.service)
    elif service == "baseline":
        baseline = _BaselineInput.model_validate(payload)
        result = compute_baseline(baseline.history, baseline.dr_windows, baseline.slots_per_day)
    else:
        raise OracleServiceError(f"unknown service {service!r}")
    return result.model_dump(mode="json")
