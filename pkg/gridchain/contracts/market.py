"""
P2P market contract: an order book per delivery slot. Clearings posted by the
oracle are re-checked before any trade is recorded.
"""

from collections import defaultdict

from gridchain.contracts.models import (
    ClearingResult,
    MarketContractState,
    Order,
    Side,
    Trade,
)
from gridchain.contracts.payloads import SubmitOrderBody
from gridchain.errors import ContractError
from gridchain.ledger.crypto import Address


def trade_payment(qty_wh: int, price: int) -> int:
    """Milli-currency owed for ``qty_wh`` at ``price`` milli-currency per kWh"""
    return qty_wh * price // 1000


def market_submit_order(
    state: MarketContractState,
    order: SubmitOrderBody,
    sender: Address,
) -> MarketContractState:
    if sender != order.owner:
        raise ContractError("order owner must sign the order")
    if order.qty_wh <= 0:
        raise ContractError("order quantity must be positive")
    if order.limit_price < 0:
        raise ContractError("order price must be non-negative")
    if order.slot < 0:
        raise ContractError("order slot must be non-negative")
    if order.slot in state.cleared_slots:
        raise ContractError(f"slot {order.slot} is already cleared")

    stored = Order(
        id=state.next_order_id,
        side=order.side,
        owner=order.owner,
        qty_wh=order.qty_wh,
        limit_price=order.limit_price,
        slot=order.slot,
    )
    return state.model_copy(
        update={
            "open_orders": (*state.open_orders, stored),
            "next_order_id": state.next_order_id + 1,
        }
    )


def check_clearing(state: MarketContractState, result: ClearingResult) -> list[Trade]:
    """Re-check an untrusted clearing against the book; returns its trades"""
    book = {o.id: o for o in state.orders_for(result.slot)}
    filled: dict[int, int] = defaultdict(int)
    trades: list[Trade] = []
    price = result.clearing_price
    if price < 0:
        raise ContractError("clearing price must be non-negative")

    for match in result.matches:
        bid, offer = book.get(match.bid_id), book.get(match.offer_id)
        if bid is None or bid.side is not Side.BID:
            raise ContractError(f"match references unknown bid {match.bid_id}")
        if offer is None or offer.side is not Side.OFFER:
            raise ContractError(f"match references unknown offer {match.offer_id}")
        if match.qty_wh <= 0:
            raise ContractError("matched quantity must be positive")
        if bid.limit_price < price:
            raise ContractError(f"bid {bid.id} limit {bid.limit_price} is below price {price}")
        if offer.limit_price > price:
            raise ContractError(
                f"offer {offer.id} limit {offer.limit_price} is above price {price}"
            )
        filled[bid.id] += match.qty_wh
        filled[offer.id] += match.qty_wh
        trades.append(
            Trade(
                slot=result.slot,
                buyer=bid.owner,
                seller=offer.owner,
                bid_id=bid.id,
                offer_id=offer.id,
                qty_wh=match.qty_wh,
                price=price,
                payment=trade_payment(match.qty_wh, price),
            )
        )

    for order_id, qty in filled.items():
        if qty > book[order_id].qty_wh:
            raise ContractError(f"order {order_id} over-filled: {qty} > {book[order_id].qty_wh}")

    bought = sum(q for oid, q in filled.items() if book[oid].side is Side.BID)
    sold = sum(q for oid, q in filled.items() if book[oid].side is Side.OFFER)
    if bought != sold or bought != result.total_qty_wh:
        raise ContractError(
            f"quantities do not balance: bought {bought}, sold {sold}, "
            f"declared {result.total_qty_wh}"
        )
    return trades


def market_record_clearing(
    state: MarketContractState,
    result: ClearingResult,
    sender: Address,
    oracle: Address,
) -> tuple[MarketContractState, list[Trade]]:
    if sender != oracle:
        raise ContractError("only the oracle may record clearings")
    if result.slot in state.cleared_slots:
        raise ContractError(f"slot {result.slot} is already cleared")

    trades = check_clearing(state, result)
    # The slot closes: matched quantity becomes trades, the remainder lapses
    remaining = tuple(o for o in state.open_orders if o.slot != result.slot)
    updated = state.model_copy(
        update={
            "open_orders": remaining,
            "clearings": (*state.clearings, result),
            "trades": (*state.trades, *trades),
            "cleared_slots": (*state.cleared_slots, result.slot),
        }
    )
    return updated, trades
