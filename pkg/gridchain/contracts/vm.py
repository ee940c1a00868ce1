"""
Contract VM
Dispatches a verified transaction on (receiver contract kind, transaction kind)
and applies it atomically to the world state
"""

import logging
from collections.abc import Callable
from typing import Any

from pydantic import ValidationError

from gridchain.contracts.demand_response import deploy_dr, dr_issue_order, dr_settle
from gridchain.contracts.market import market_record_clearing, market_submit_order
from gridchain.contracts.meter import deploy_meter, meter_update
from gridchain.contracts.models import (
    ClearingResult,
    ContractState,
    DRContractState,
    MarketContractState,
    MeterContractState,
    OracleRequestRecord,
    VPPContractState,
)
from gridchain.contracts.payloads import (
    DispatchAllocation,
    DispatchBody,
    DRInit,
    MarketInit,
    MeterInit,
    OracleRequestBody,
    OracleResponseBody,
    VPPInit,
    decode_payload,
)
from gridchain.contracts.vpp import vpp_record_dispatch, vpp_register_asset, vpp_settle
from gridchain.contracts.world import ExecutionContext, Receipt, StateTxn, WorldState
from gridchain.errors import ContractError
from gridchain.ledger.crypto import NULL_ADDRESS, Address, contract_address
from gridchain.ledger.primitives import Transaction, TxKind

logger = logging.getLogger(__name__)

Handler = Callable[[StateTxn, Transaction, Any, ExecutionContext], Receipt | None]


def deploy_contract(world: WorldState, tx: Transaction, ctx: ExecutionContext) -> WorldState:
    """Create the contract named by a Deploy transaction"""
    txn = StateTxn(world)
    _deploy(txn, tx, decode_payload(TxKind.DEPLOY, tx.payload), ctx)
    return txn.commit()


def _deploy(txn: StateTxn, tx: Transaction, init: Any, ctx: ExecutionContext) -> Receipt:
    if tx.receiver != NULL_ADDRESS:
        raise ContractError("deploy must be sent to the null address")
    address = contract_address(tx.sender, tx.nonce)
    # Unreachable while nonces are consumed on every transaction
    assert address not in txn.contracts, f"duplicate deploy at {address}"

    state: ContractState
    if isinstance(init, MeterInit):
        state = deploy_meter(init, tx.sender)
    elif isinstance(init, DRInit):
        state = deploy_dr(init, tx.sender, ctx.slots_per_day)
    elif isinstance(init, MarketInit):
        state = MarketContractState(operator=tx.sender)
    elif isinstance(init, VPPInit):
        state = VPPContractState(operator=tx.sender)
    else:  # pragma: no cover - the payload adapter only yields the four kinds
        raise ContractError(f"unknown contract kind {init!r}")
    txn.contracts[address] = state
    return _ok(tx, created=address)


def _target(txn: StateTxn, tx: Transaction, expected: type) -> Any:
    state = txn.contracts.get(tx.receiver)
    if state is None:
        raise ContractError(f"unknown contract {tx.receiver}")
    if not isinstance(state, expected):
        raise ContractError(f"{tx.kind.name} is not a method of a {state.kind} contract")
    return state


def _meter_update(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    state = _target(txn, tx, MeterContractState)
    txn.contracts[tx.receiver] = meter_update(state, body, tx.sender, tx.receiver)


def _dr_issue(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    state = _target(txn, tx, DRContractState)
    txn.contracts[tx.receiver] = dr_issue_order(state, body, tx.sender, ctx.tick)


def _dr_settle(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    state: DRContractState = _target(txn, tx, DRContractState)
    if tx.sender != state.aggregator:
        raise ContractError("only the aggregator may settle orders")
    updated, settlement = dr_settle(state, body.order_id, body.metered, ctx.tick)
    txn.contracts[tx.receiver] = updated
    txn.transfer(state.aggregator, state.prosumer, settlement.net)


def _market_submit(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    state = _target(txn, tx, MarketContractState)
    txn.contracts[tx.receiver] = market_submit_order(state, body, tx.sender)


def _apply_clearing(
    txn: StateTxn, market: Address, result: ClearingResult, sender: Address, oracle: Address
) -> None:
    state = txn.contracts.get(market)
    if not isinstance(state, MarketContractState):
        raise ContractError(f"{market} is not a market contract")
    updated, trades = market_record_clearing(state, result, sender, oracle)
    txn.contracts[market] = updated
    for trade in trades:
        txn.transfer(trade.buyer, trade.seller, trade.payment)


def _market_clearing(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    _target(txn, tx, MarketContractState)
    _apply_clearing(txn, tx.receiver, body, tx.sender, ctx.oracle)


def _vpp_register(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    state = _target(txn, tx, VPPContractState)
    txn.contracts[tx.receiver] = vpp_register_asset(state, body, tx.sender, ctx.slots_per_day)


def _apply_dispatch(
    txn: StateTxn, vpp: Address, body: DispatchBody, sender: Address, ctx: ExecutionContext
) -> None:
    state = txn.contracts.get(vpp)
    if not isinstance(state, VPPContractState):
        raise ContractError(f"{vpp} is not a VPP contract")
    txn.contracts[vpp] = vpp_record_dispatch(state, body, sender, ctx.oracle, ctx.tick)


def _vpp_dispatch(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    _target(txn, tx, VPPContractState)
    _apply_dispatch(txn, tx.receiver, body, tx.sender, ctx)


def _vpp_settle(txn: StateTxn, tx: Transaction, body: Any, ctx: ExecutionContext) -> None:
    state: VPPContractState = _target(txn, tx, VPPContractState)
    updated, settlement = vpp_settle(state, body.service_id, body.delivered, tx.sender, ctx.tick)
    txn.contracts[tx.receiver] = updated
    for member in settlement.members:
        txn.transfer(state.operator, member.owner, member.net)


def _oracle_request(
    txn: StateTxn, tx: Transaction, body: OracleRequestBody, ctx: ExecutionContext
) -> Receipt:
    if tx.receiver != ctx.oracle:
        raise ContractError("oracle requests must be addressed to the oracle")
    if body.service in ("clear", "coalition"):
        expected = MarketContractState if body.service == "clear" else VPPContractState
        if body.target is None or not isinstance(txn.contracts.get(body.target), expected):
            raise ContractError(f"{body.service} request needs a matching target contract")

    record = OracleRequestRecord(
        id=txn.next_request_id,
        requester=tx.sender,
        service=body.service,
        criteria=body.criteria,
        target=body.target,
        params=body.params,
        height=ctx.height,
        tick=ctx.tick,
    )
    txn.requests[record.id] = record
    txn.next_request_id += 1
    return _ok(tx, request_id=record.id)


def _oracle_response(
    txn: StateTxn, tx: Transaction, body: OracleResponseBody, ctx: ExecutionContext
) -> Receipt:
    if tx.sender != ctx.oracle:
        raise ContractError("only the oracle may answer requests")
    record = txn.requests.get(body.request_id)
    if record is None:
        raise ContractError(f"unknown oracle request {body.request_id}")
    if record.status != "pending":
        raise ContractError(f"oracle request {body.request_id} is already {record.status}")

    status, error = ("answered", None) if body.ok else ("failed", body.error or "failed")
    if body.ok and record.service in ("clear", "coalition"):
        # Apply on a nested scratch so a refused result leaves contracts untouched
        nested = StateTxn(txn.commit())
        try:
            _apply_oracle_result(nested, record, body.result or {}, tx.sender, ctx)
        except (ContractError, ValidationError, KeyError, TypeError) as e:
            status, error = "rejected", _reason(e)
            logger.warning(f"Oracle result for request {record.id} rejected: {error}")
        else:
            txn.contracts, txn.balances = nested.contracts, nested.balances

    txn.requests[record.id] = record.model_copy(
        update={
            "status": status,
            "result": body.result,
            "error": error,
            "answered_height": ctx.height,
        }
    )
    return _ok(tx, request_id=record.id)


def _apply_oracle_result(
    txn: StateTxn,
    record: OracleRequestRecord,
    result: dict[str, Any],
    sender: Address,
    ctx: ExecutionContext,
) -> None:
    assert record.target is not None
    if record.service == "clear":
        _apply_clearing(txn, record.target, ClearingResult.model_validate(result), sender, ctx.oracle)
        return
    plan = result
    dispatch = DispatchBody(
        service=plan["service"],
        window_start=record.params["window_start"],
        members=tuple(
            DispatchAllocation(asset_id=m["asset_id"], scheduled_wh=m["scheduled_wh"])
            for m in plan["members"]
        ),
    )
    _apply_dispatch(txn, record.target, dispatch, sender, ctx)


HANDLERS: dict[TxKind, Handler] = {
    TxKind.DEPLOY: _deploy,
    TxKind.METER_UPDATE: _meter_update,
    TxKind.DR_ISSUE_ORDER: _dr_issue,
    TxKind.DR_SETTLE: _dr_settle,
    TxKind.MARKET_SUBMIT_ORDER: _market_submit,
    TxKind.MARKET_RECORD_CLEARING: _market_clearing,
    TxKind.VPP_REGISTER_ASSET: _vpp_register,
    TxKind.VPP_RECORD_DISPATCH: _vpp_dispatch,
    TxKind.VPP_SETTLE: _vpp_settle,
    TxKind.ORACLE_REQUEST: _oracle_request,
    TxKind.ORACLE_RESPONSE: _oracle_response,
}


def _ok(tx: Transaction, **extra: Any) -> Receipt:
    return Receipt(tx_hash=tx.hash, kind=tx.kind, sender=tx.sender, ok=True, **extra)


def _reason(error: Exception) -> str:
    if isinstance(error, ValidationError):
        return f"malformed payload: {error.error_count()} validation error(s)"
    return str(error)


def exec_transaction(
    world: WorldState, tx: Transaction, ctx: ExecutionContext
) -> tuple[WorldState, Receipt]:
    """Execute one signature-checked transaction; the nonce is consumed either way"""
    txn = StateTxn(world)
    try:
        body = decode_payload(tx.kind, tx.payload)
        receipt = HANDLERS[tx.kind](txn, tx, body, ctx) or _ok(tx)
    except (ContractError, ValidationError) as e:
        logger.debug(f"{tx.kind.name} from {tx.sender.short()} failed: {_reason(e)}")
        failed = Receipt(
            tx_hash=tx.hash, kind=tx.kind, sender=tx.sender, ok=False, error=_reason(e)
        )
        return world.with_nonce_bumped(tx.sender), failed
    return txn.commit().with_nonce_bumped(tx.sender), receipt
