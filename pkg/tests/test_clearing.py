"""
Tests for the uniform-price double auction
"""

import random

import pytest

from gridchain.contracts.market import check_clearing
from gridchain.contracts.models import MarketContractState, Order, Side
from gridchain.ledger.crypto import NULL_ADDRESS
from gridchain.oracle.clearing import clear_market, max_volume, pro_rata

pytestmark = pytest.mark.unit


def _book(bids, offers, slot=0):
    """Orders from (qty, price) pairs; bids take the low ids"""
    out_bids = [
        Order(id=i, side=Side.BID, owner=NULL_ADDRESS, qty_wh=q, limit_price=p, slot=slot)
        for i, (q, p) in enumerate(bids)
    ]
    out_offers = [
        Order(id=len(bids) + i, side=Side.OFFER, owner=NULL_ADDRESS, qty_wh=q, limit_price=p, slot=slot)
        for i, (q, p) in enumerate(offers)
    ]
    return out_bids, out_offers


def _brute_force_volume(bids, offers):
    best = 0
    for price in range(0, 501):
        demand = sum(b.qty_wh for b in bids if b.limit_price >= price)
        supply = sum(o.qty_wh for o in offers if o.limit_price <= price)
        best = max(best, min(demand, supply))
    return best


def _random_book(rng):
    bids = [(rng.randint(1, 5000), rng.randint(0, 500)) for _ in range(rng.randint(0, 6))]
    offers = [(rng.randint(1, 5000), rng.randint(0, 500)) for _ in range(rng.randint(0, 6))]
    return bids, offers


class TestExamples:
    def test_single_crossing_pair(self):
        result = clear_market(*_book([(5000, 300)], [(5000, 200)]))
        assert result.total_qty_wh == 5000
        assert result.clearing_price == 250

    def test_two_levels_each_side(self):
        result = clear_market(*_book([(3000, 300), (3000, 250)], [(2000, 100), (4000, 240)]))
        assert result.total_qty_wh == 6000
        assert result.clearing_price == 245

    def test_unmatched_bid_bounds_the_price(self):
        result = clear_market(*_book([(1000, 300), (1000, 150)], [(1000, 100)]))
        assert result.total_qty_wh == 1000
        assert result.clearing_price == 225

    def test_no_overlap_means_no_trade(self):
        result = clear_market(*_book([(1000, 100)], [(1000, 200)]))
        assert result.total_qty_wh == 0
        assert result.matches == ()

    def test_empty_offer_book(self):
        result = clear_market(*_book([(1000, 300)], []), slot=7)
        assert result.total_qty_wh == 0
        assert result.slot == 7

    def test_marginal_level_is_shared_pro_rata(self):
        # Two offers at the marginal price split 3000 Wh by size
        bids, offers = _book([(3000, 300)], [(3000, 200), (1000, 200)])
        result = clear_market(bids, offers)
        filled = {}
        for match in result.matches:
            filled[match.offer_id] = filled.get(match.offer_id, 0) + match.qty_wh
        assert filled == {1: 2250, 2: 750}

    def test_pro_rata_remainder_goes_to_the_lowest_id(self):
        orders = [
            Order(id=i, side=Side.OFFER, owner=NULL_ADDRESS, qty_wh=1000, limit_price=10, slot=0)
            for i in (4, 2, 9)
        ]
        assert pro_rata(orders, 1000) == {2: 334, 4: 333, 9: 333}


class TestProperties:
    def test_volume_is_the_brute_force_maximum(self):
        rng = random.Random(1000)
        for _ in range(1000):
            bids, offers = _book(*_random_book(rng))
            result = clear_market(bids, offers)
            assert result.total_qty_wh == _brute_force_volume(bids, offers)
            assert max_volume(bids, offers) == result.total_qty_wh

    def test_price_is_feasible_for_every_match(self):
        rng = random.Random(17)
        for _ in range(500):
            bids, offers = _book(*_random_book(rng))
            result = clear_market(bids, offers)
            if not result.matches:
                continue
            by_id = {o.id: o for o in (*bids, *offers)}
            assert min(by_id[m.bid_id].limit_price for m in result.matches) >= result.clearing_price
            assert max(by_id[m.offer_id].limit_price for m in result.matches) <= result.clearing_price

    def test_results_pass_the_contract_check(self):
        rng = random.Random(23)
        for _ in range(300):
            bids, offers = _book(*_random_book(rng))
            state = MarketContractState(operator=NULL_ADDRESS, open_orders=(*bids, *offers))
            trades = check_clearing(state, clear_market(bids, offers, 0))
            assert sum(t.qty_wh for t in trades) == _brute_force_volume(bids, offers)

    def test_more_supply_never_raises_the_price(self):
        rng = random.Random(31)
        checked = 0
        for _ in range(1000):
            bids, offers = _random_book(rng)
            extra = (rng.randint(1, 5000), rng.randint(0, 500))
            before = clear_market(*_book(bids, offers))
            after = clear_market(*_book(bids, [*offers, extra]))
            # Price is only defined while something trades
            if before.total_qty_wh and after.total_qty_wh:
                checked += 1
                assert after.clearing_price <= before.clearing_price
        assert checked > 100

    def test_more_demand_never_lowers_the_price(self):
        rng = random.Random(37)
        checked = 0
        for _ in range(1000):
            bids, offers = _random_book(rng)
            extra = (rng.randint(1, 5000), rng.randint(0, 500))
            before = clear_market(*_book(bids, offers))
            after = clear_market(*_book([*bids, extra], offers))
            if before.total_qty_wh and after.total_qty_wh:
                checked += 1
                assert after.clearing_price >= before.clearing_price
        assert checked > 100
