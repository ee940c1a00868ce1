"""
Settlement Audit
Recomputes every DR settlement, market clearing and VPP payout from the raw
readings and orders on chain, and lists where the recorded outcome differs
"""

import logging
from collections import Counter, defaultdict
from collections.abc import Sequence
from pathlib import Path
from types import MappingProxyType

from pydantic import BaseModel, ConfigDict, Field

from gridchain.agents.aggregator_agent import vpp_delivered
from gridchain.contracts.demand_response import compute_settlement
from gridchain.contracts.market import check_clearing
from gridchain.contracts.models import (
    EnergyReading,
    MarketContractState,
    Order,
    Side,
)
from gridchain.contracts.payloads import SubmitOrderBody
from gridchain.contracts.vpp import settle_member
from gridchain.contracts.world import Receipt, WorldState
from gridchain.errors import ContractError
from gridchain.ledger.crypto import Address
from gridchain.ledger.genesis import Genesis
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Block, TxKind
from gridchain.ledger.replay import replay_blocks
from gridchain.ledger.storage import load_ledger
from gridchain.oracle.clearing import clear_market

logger = logging.getLogger(__name__)


class Discrepancy(BaseModel):
    model_config = ConfigDict(frozen=True)

    check: str
    location: str
    detail: str


class AuditReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    checked: dict[str, int] = Field(default_factory=dict)
    discrepancies: list[Discrepancy] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.discrepancies


class _ChainRecord:
    """Readings and order books as the chain accepted them"""

    def __init__(self) -> None:
        self.readings: dict[Address, dict[int, int]] = defaultdict(dict)
        self.books: dict[Address, list[Order]] = defaultdict(list)

    def add(self, block: Block, receipts: Sequence[Receipt]) -> None:
        for tx, receipt in zip(block.transactions, receipts):
            if not receipt.ok:
                continue
            if tx.kind is TxKind.METER_UPDATE:
                reading = EnergyReading.model_validate_json(tx.payload)
                self.readings[reading.device][reading.slot] = reading.energy_wh
            elif tx.kind is TxKind.MARKET_SUBMIT_ORDER:
                body = SubmitOrderBody.model_validate_json(tx.payload)
                book = self.books[tx.receiver]
                # Order ids count accepted submissions per market
                book.append(
                    Order(
                        id=len(book),
                        side=body.side,
                        owner=body.owner,
                        qty_wh=body.qty_wh,
                        limit_price=body.limit_price,
                        slot=body.slot,
                    )
                )


def _audit_dr(world: WorldState, chain: _ChainRecord, found: list[Discrepancy]) -> int:
    checked = 0
    for address, dr in world.contracts_of("dr"):
        readings = chain.readings.get(dr.meter, {})
        for settlement in dr.settlements:
            checked += 1
            location = f"dr {address.hex()} order {settlement.order_id}"
            order = dr.order(settlement.order_id)
            if order is None:
                found.append(Discrepancy(check="dr", location=location, detail="order missing"))
                continue
            missing = [slot for slot in order.slots if slot not in readings]
            if missing:
                found.append(
                    Discrepancy(
                        check="dr", location=location, detail=f"no chain reading for slots {missing}"
                    )
                )
                continue
            metered = [
                EnergyReading(slot=slot, energy_wh=readings[slot], device=dr.meter)
                for slot in order.slots
            ]
            expected = compute_settlement(order, metered, settlement.settled_tick)
            if expected != settlement:
                found.append(
                    Discrepancy(
                        check="dr",
                        location=location,
                        detail=(
                            f"chain readings give delivered {expected.delivered_wh} net "
                            f"{expected.net}, recorded delivered {settlement.delivered_wh} "
                            f"net {settlement.net}"
                        ),
                    )
                )
    return checked


def _audit_market(world: WorldState, chain: _ChainRecord, found: list[Discrepancy]) -> int:
    checked = 0
    for address, market in world.contracts_of("market"):
        book = chain.books.get(address, [])
        for clearing in market.clearings:
            checked += 1
            location = f"market {address.hex()} slot {clearing.slot}"
            orders = [o for o in book if o.slot == clearing.slot]
            snapshot = MarketContractState(operator=market.operator, open_orders=tuple(orders))
            try:
                trades = check_clearing(snapshot, clearing)
            except ContractError as e:
                found.append(Discrepancy(check="clearing", location=location, detail=str(e)))
                continue
            recorded = [t for t in market.trades if t.slot == clearing.slot]
            if trades != recorded:
                found.append(
                    Discrepancy(
                        check="clearing", location=location, detail="trades differ from matches"
                    )
                )
            fresh = clear_market(
                [o for o in orders if o.side is Side.BID],
                [o for o in orders if o.side is Side.OFFER],
                clearing.slot,
            )
            if fresh.total_qty_wh != clearing.total_qty_wh:
                found.append(
                    Discrepancy(
                        check="clearing",
                        location=location,
                        detail=(
                            f"volume {clearing.total_qty_wh} Wh, "
                            f"maximum is {fresh.total_qty_wh} Wh"
                        ),
                    )
                )
    return checked


def _audit_vpp(world: WorldState, view: ChainView, found: list[Discrepancy]) -> int:
    checked = 0
    for address, vpp in world.contracts_of("vpp"):
        for dispatch in vpp.dispatches:
            location = f"vpp {address.hex()} service {dispatch.service_id}"
            scheduled = 0
            for member in dispatch.members:
                asset = vpp.asset(member.asset_id)
                if asset is None or dispatch.service.admits(asset) is not None:
                    found.append(
                        Discrepancy(
                            check="vpp",
                            location=location,
                            detail=f"asset {member.asset_id} does not meet the service constraints",
                        )
                    )
                elif member.scheduled_wh > asset.capacity_wh_per_slot:
                    found.append(
                        Discrepancy(
                            check="vpp",
                            location=location,
                            detail=f"asset {member.asset_id} scheduled beyond capacity",
                        )
                    )
                scheduled += member.scheduled_wh
            if scheduled < dispatch.service.capacity_wh_per_slot:
                found.append(
                    Discrepancy(check="vpp", location=location, detail="dispatch under capacity")
                )

        for settlement in vpp.settlements:
            checked += 1
            location = f"vpp {address.hex()} service {settlement.service_id}"
            record = vpp.dispatch(settlement.service_id)
            if record is None:
                found.append(Discrepancy(check="vpp", location=location, detail="dispatch missing"))
                continue
            delivered = vpp_delivered(record, vpp, view)
            if delivered is None:
                found.append(
                    Discrepancy(check="vpp", location=location, detail="window readings missing")
                )
                continue
            by_asset = {d.asset_id: d.delivered_wh for d in delivered}
            recorded = {m.asset_id: m for m in settlement.members}
            for member in record.members:
                asset = vpp.asset(member.asset_id)
                assert asset is not None
                expected = settle_member(member, record, by_asset[member.asset_id], asset.cost_rate)
                if recorded.get(member.asset_id) != expected:
                    found.append(
                        Discrepancy(
                            check="vpp",
                            location=f"{location} asset {member.asset_id}",
                            detail=(
                                f"chain readings give delivered {expected.delivered_wh} "
                                f"net {expected.net}"
                            ),
                        )
                    )
    return checked


def _audit_balances(world: WorldState, found: list[Discrepancy]) -> None:
    expected: Counter[Address] = Counter()
    for _, market in world.contracts_of("market"):
        for trade in market.trades:
            expected[trade.buyer] -= trade.payment
            expected[trade.seller] += trade.payment
    for _, dr in world.contracts_of("dr"):
        for settlement in dr.settlements:
            expected[dr.aggregator] -= settlement.net
            expected[dr.prosumer] += settlement.net
    for _, vpp in world.contracts_of("vpp"):
        for settlement in vpp.settlements:
            for member in settlement.members:
                expected[vpp.operator] -= member.net
                expected[member.owner] += member.net

    for address in sorted(set(expected) | set(world.balances)):
        if expected[address] != world.balance_of(address):
            found.append(
                Discrepancy(
                    check="balance",
                    location=address.hex(),
                    detail=(
                        f"settlements imply {expected[address]}, "
                        f"state holds {world.balance_of(address)}"
                    ),
                )
            )
    total = sum(world.balances.values())
    if total != 0:
        found.append(
            Discrepancy(check="balance", location="all accounts", detail=f"balances sum to {total}")
        )


def audit_chain(blocks: list[Block], genesis: Genesis) -> AuditReport:
    """Audit a chain; raises ReplayError when the chain itself is invalid"""
    chain = _ChainRecord()
    world = None
    for step in replay_blocks(blocks, genesis):
        chain.add(step.block, step.receipts)
        world = step.world
    assert world is not None

    view = ChainView(
        genesis,
        blocks[-1],
        world,
        MappingProxyType({d: MappingProxyType(s) for d, s in chain.readings.items()}),
    )
    found: list[Discrepancy] = []
    checked = {
        "dr_settlements": _audit_dr(world, chain, found),
        "clearings": _audit_market(world, chain, found),
        "vpp_settlements": _audit_vpp(world, view, found),
    }
    _audit_balances(world, found)
    for discrepancy in found:
        logger.warning(f"Audit: {discrepancy.check} at {discrepancy.location}: {discrepancy.detail}")
    return AuditReport(checked=checked, discrepancies=found)


def audit_ledger(ledger_path: str | Path, genesis_path: str | Path) -> AuditReport:
    return audit_chain(load_ledger(Path(ledger_path)), Genesis.load(Path(genesis_path)))
