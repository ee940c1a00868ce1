"""
Uniform-Price Double Auction
Clears one slot's book at the volume-maximizing quantity
"""

import logging
from collections.abc import Sequence
from itertools import groupby

from gridchain.contracts.models import ClearingResult, Match, Order

logger = logging.getLogger(__name__)


def max_volume(bids: Sequence[Order], offers: Sequence[Order]) -> int:
    """Largest quantity tradable at a single price; candidate prices are the limits"""
    best = 0
    for price in {o.limit_price for o in (*bids, *offers)}:
        demand = sum(b.qty_wh for b in bids if b.limit_price >= price)
        supply = sum(o.qty_wh for o in offers if o.limit_price <= price)
        best = max(best, min(demand, supply))
    return best


def pro_rata(orders: Sequence[Order], quantity: int) -> dict[int, int]:
    """Split ``quantity`` over one price level by size; leftover Wh to the lowest ids"""
    level = sum(o.qty_wh for o in orders)
    fills = {o.id: quantity * o.qty_wh // level for o in orders}
    leftover = quantity - sum(fills.values())
    for order in sorted(orders, key=lambda o: o.id):
        if leftover == 0:
            break
        extra = min(order.qty_wh - fills[order.id], leftover)
        fills[order.id] += extra
        leftover -= extra
    return fills


def _fill_side(ranked: Sequence[Order], quantity: int) -> dict[int, int]:
    """Fill whole price levels best-first; the marginal level shares pro-rata"""
    fills: dict[int, int] = {}
    remaining = quantity
    for _, level in groupby(ranked, key=lambda o: o.limit_price):
        orders = list(level)
        size = sum(o.qty_wh for o in orders)
        if remaining >= size:
            fills.update({o.id: o.qty_wh for o in orders})
            remaining -= size
        else:
            fills.update(pro_rata(orders, remaining))
            remaining = 0
        if remaining == 0:
            break
    return {order_id: qty for order_id, qty in fills.items() if qty > 0}


def _pair(
    bids: Sequence[Order],
    offers: Sequence[Order],
    bid_fills: dict[int, int],
    offer_fills: dict[int, int],
) -> list[Match]:
    buy = [[b.id, bid_fills[b.id]] for b in bids if b.id in bid_fills]
    sell = [[o.id, offer_fills[o.id]] for o in offers if o.id in offer_fills]
    matches: list[Match] = []
    i = j = 0
    while i < len(buy) and j < len(sell):
        qty = min(buy[i][1], sell[j][1])
        matches.append(Match(bid_id=buy[i][0], offer_id=sell[j][0], qty_wh=qty))
        buy[i][1] -= qty
        sell[j][1] -= qty
        if buy[i][1] == 0:
            i += 1
        if sell[j][1] == 0:
            j += 1
    return matches


def clear_market(
    bids: Sequence[Order], offers: Sequence[Order], slot: int | None = None
) -> ClearingResult:
    """Clear a one-slot book at a uniform price"""
    if slot is None:
        slot = min((o.slot for o in (*bids, *offers)), default=0)
    ranked_bids = sorted(bids, key=lambda o: (-o.limit_price, o.id))
    ranked_offers = sorted(offers, key=lambda o: (o.limit_price, o.id))

    quantity = max_volume(ranked_bids, ranked_offers)
    if quantity == 0:
        return ClearingResult(slot=slot, clearing_price=0)

    bid_fills = _fill_side(ranked_bids, quantity)
    offer_fills = _fill_side(ranked_offers, quantity)

    marginal_bid = min(b.limit_price for b in ranked_bids if b.id in bid_fills)
    marginal_offer = max(o.limit_price for o in ranked_offers if o.id in offer_fills)
    unmatched_bids = [
        b.limit_price for b in ranked_bids if bid_fills.get(b.id, 0) < b.qty_wh
    ]
    unmatched_offers = [
        o.limit_price for o in ranked_offers if offer_fills.get(o.id, 0) < o.qty_wh
    ]
    # Midpoint of the competitive interval; with nothing left over this is the
    # midpoint of the marginal matched bid and offer
    high = min([marginal_bid, *unmatched_offers])
    low = max([marginal_offer, *unmatched_bids])
    price = (low + high) // 2

    matches = _pair(ranked_bids, ranked_offers, bid_fills, offer_fills)
    logger.debug(f"Slot {slot}: cleared {quantity} Wh at {price} over {len(matches)} matches")
    return ClearingResult(
        slot=slot, clearing_price=price, matches=tuple(matches), total_qty_wh=quantity
    )
