"""
Run Reports
Everything in a report is derived from chain data alone: a replay of the
blocks against the genesis. JSON for machines, CSV for the tables
"""

import logging
from collections import Counter, defaultdict
from pathlib import Path
from types import MappingProxyType

import orjson
import pandas as pd
from pydantic import BaseModel, ConfigDict

from gridchain.agents.prosumer_agent import read_earnings
from gridchain.contracts.world import WorldState
from gridchain.ledger.crypto import Address
from gridchain.ledger.genesis import Genesis
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Block
from gridchain.ledger.replay import replay_blocks

logger = logging.getLogger(__name__)


class Row(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class ChainStats(Row):
    blocks: int
    height: int
    transactions: int
    failed_receipts: int
    transactions_by_kind: dict[str, int]
    tip_hash: str
    state_root: str


class NetworkSummary(Row):
    converged: bool
    divergences: int
    max_lag_ticks: int | None
    messages_sent: int
    messages_dropped: int


class EarningsRow(Row):
    prosumer: str
    address: str
    market: int
    dr: int
    vpp: int
    total: int
    balance: int


class ClearingSummary(Row):
    market: str
    slot: int
    clearing_price: int
    volume_wh: int
    matches: int


class TradeRow(Row):
    slot: int
    buyer: str
    seller: str
    bid_id: int
    offer_id: int
    qty_wh: int
    price: int
    payment: int


class DRSettlementRow(Row):
    contract: str
    prosumer: str
    order_id: int
    window_start: int
    window_end: int
    direction: str
    amount_wh: int
    ordered_wh: int
    delivered_wh: int
    shortfall_wh: int
    reward: int
    penalty: int
    net: int
    settled_tick: int


class DRCostBenefit(Row):
    """The aggregator's view of one contracted prosumer"""

    prosumer: str
    orders: int
    ordered_wh: int
    delivered_wh: int
    net_paid: int
    # Milli-currency per delivered kWh, floored; None when nothing was delivered
    cost_per_kwh: int | None


class VPPSettlementRow(Row):
    service_id: str
    asset_id: int
    owner: str
    scheduled_wh: int
    delivered_wh: int
    credited_wh: int
    shortfall_wh: int
    payout: int
    penalty: int
    net: int


class ConservationChecks(Row):
    market_buyer_payments: int
    market_seller_receipts: int
    dr_aggregator_payouts: int
    dr_prosumer_nets: int
    vpp_operator_payouts: int
    vpp_member_nets: int
    balance_sum: int
    earnings_reconciled: bool

    @property
    def ok(self) -> bool:
        return (
            self.market_buyer_payments == self.market_seller_receipts
            and self.dr_aggregator_payouts == self.dr_prosumer_nets
            and self.vpp_operator_payouts == self.vpp_member_nets
            and self.balance_sum == 0
            and self.earnings_reconciled
        )


class ReportBundle(Row):
    scenario: str | None = None
    seed: int | None = None
    chain_id: str
    chain: ChainStats
    network: NetworkSummary | None = None
    earnings: list[EarningsRow]
    clearings: list[ClearingSummary]
    trades: list[TradeRow]
    dr_settlements: list[DRSettlementRow]
    dr_cost_benefit: list[DRCostBenefit]
    vpp_settlements: list[VPPSettlementRow]
    oracle_requests: dict[str, dict[str, int]]
    conservation: ConservationChecks
    events: list[str]

    def to_json(self) -> bytes:
        data = self.model_dump(mode="json")
        data["conservation"]["ok"] = self.conservation.ok
        return orjson.dumps(data, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)


def _world_view(genesis: Genesis, tip: Block, world: WorldState) -> ChainView:
    return ChainView(genesis, tip, world, MappingProxyType({}))


def build_report(
    blocks: list[Block],
    genesis: Genesis,
    scenario: str | None = None,
    seed: int | None = None,
    network: NetworkSummary | None = None,
) -> ReportBundle:
    labels = {a.address: a.label for a in genesis.accounts}

    def name(address: Address) -> str:
        return labels.get(address, address.hex())

    kinds: Counter[str] = Counter()
    events: list[str] = []
    failed = 0
    world = None
    for step in replay_blocks(blocks, genesis):
        world = step.world
        for tx, receipt in zip(step.block.transactions, step.receipts):
            kinds[tx.kind.name] += 1
            if not receipt.ok:
                failed += 1
                events.append(
                    f"height {step.block.height}: {tx.kind.name} from {name(tx.sender)} "
                    f"failed: {receipt.error}"
                )
    assert world is not None
    view = _world_view(genesis, blocks[-1], world)

    oracle_counts: dict[str, Counter[str]] = defaultdict(Counter)
    for request_id in sorted(world.oracle_requests):
        record = world.oracle_requests[request_id]
        oracle_counts[record.service][record.status] += 1
        if record.status in ("failed", "rejected"):
            events.append(
                f"oracle request {record.id} ({record.service}) from {name(record.requester)} "
                f"{record.status}: {record.error}"
            )

    clearings, trades = [], []
    buyer_payments: Counter[Address] = Counter()
    seller_receipts: Counter[Address] = Counter()
    for address, market in view.contracts_of("market"):
        for clearing in market.clearings:
            clearings.append(
                ClearingSummary(
                    market=address.hex(),
                    slot=clearing.slot,
                    clearing_price=clearing.clearing_price,
                    volume_wh=clearing.total_qty_wh,
                    matches=len(clearing.matches),
                )
            )
        for trade in market.trades:
            buyer_payments[trade.buyer] += trade.payment
            seller_receipts[trade.seller] += trade.payment
            trades.append(
                TradeRow(
                    slot=trade.slot,
                    buyer=name(trade.buyer),
                    seller=name(trade.seller),
                    bid_id=trade.bid_id,
                    offer_id=trade.offer_id,
                    qty_wh=trade.qty_wh,
                    price=trade.price,
                    payment=trade.payment,
                )
            )

    dr_rows, cost_benefit = [], []
    dr_payouts = 0
    for address, dr in view.contracts_of("dr"):
        settled = {s.order_id: s for s in dr.settlements}
        for order in dr.orders:
            settlement = settled.get(order.id)
            if settlement is None:
                continue
            dr_payouts += settlement.net
            dr_rows.append(
                DRSettlementRow(
                    contract=address.hex(),
                    prosumer=name(dr.prosumer),
                    order_id=order.id,
                    window_start=order.window_start,
                    window_end=order.window_end,
                    direction=order.direction.value,
                    amount_wh=order.amount_wh,
                    ordered_wh=order.ordered_total_wh,
                    delivered_wh=settlement.delivered_wh,
                    shortfall_wh=settlement.shortfall_wh,
                    reward=settlement.reward,
                    penalty=settlement.penalty,
                    net=settlement.net,
                    settled_tick=settlement.settled_tick,
                )
            )
        if dr.orders:
            delivered = sum(s.delivered_wh for s in dr.settlements)
            net_paid = sum(s.net for s in dr.settlements)
            cost_benefit.append(
                DRCostBenefit(
                    prosumer=name(dr.prosumer),
                    orders=len(dr.orders),
                    ordered_wh=sum(o.ordered_total_wh for o in dr.orders),
                    delivered_wh=delivered,
                    net_paid=net_paid,
                    cost_per_kwh=net_paid * 1000 // delivered if delivered else None,
                )
            )

    vpp_rows = []
    vpp_payouts = 0
    for _, vpp in view.contracts_of("vpp"):
        for settlement in vpp.settlements:
            for member in settlement.members:
                vpp_payouts += member.net
                vpp_rows.append(
                    VPPSettlementRow(
                        service_id=settlement.service_id,
                        asset_id=member.asset_id,
                        owner=name(member.owner),
                        scheduled_wh=member.scheduled_wh,
                        delivered_wh=member.delivered_wh,
                        credited_wh=member.credited_wh,
                        shortfall_wh=member.shortfall_wh,
                        payout=member.payout,
                        penalty=member.penalty,
                        net=member.net,
                    )
                )

    earnings = []
    reconciled = True
    dr_nets = vpp_nets = 0
    for account in genesis.accounts_with_role("prosumer"):
        mine = read_earnings(view, account.address)
        total = sum(mine.values())
        balance = world.balance_of(account.address)
        reconciled &= total == balance
        dr_nets += mine["dr"]
        vpp_nets += mine["vpp"]
        earnings.append(
            EarningsRow(
                prosumer=account.label,
                address=account.address.hex(),
                market=mine["market"],
                dr=mine["dr"],
                vpp=mine["vpp"],
                total=total,
                balance=balance,
            )
        )

    conservation = ConservationChecks(
        market_buyer_payments=sum(buyer_payments.values()),
        market_seller_receipts=sum(seller_receipts.values()),
        dr_aggregator_payouts=dr_payouts,
        dr_prosumer_nets=dr_nets,
        vpp_operator_payouts=vpp_payouts,
        vpp_member_nets=vpp_nets,
        balance_sum=sum(world.balances.values()),
        earnings_reconciled=reconciled,
    )
    if not conservation.ok:
        logger.warning(f"Conservation checks failed: {conservation.model_dump()}")

    return ReportBundle(
        scenario=scenario,
        seed=seed,
        chain_id=genesis.chain_id,
        chain=ChainStats(
            blocks=len(blocks),
            height=blocks[-1].height,
            transactions=sum(kinds.values()),
            failed_receipts=failed,
            transactions_by_kind=dict(sorted(kinds.items())),
            tip_hash=blocks[-1].hash.hex(),
            state_root=world.root.hex(),
        ),
        network=network,
        earnings=earnings,
        clearings=clearings,
        trades=trades,
        dr_settlements=dr_rows,
        dr_cost_benefit=cost_benefit,
        vpp_settlements=vpp_rows,
        oracle_requests={s: dict(sorted(c.items())) for s, c in sorted(oracle_counts.items())},
        conservation=conservation,
        events=events,
    )


TABLES: dict[str, tuple[str, type[Row]]] = {
    "trades.csv": ("trades", TradeRow),
    "dr_settlements.csv": ("dr_settlements", DRSettlementRow),
    "vpp_settlements.csv": ("vpp_settlements", VPPSettlementRow),
    "earnings.csv": ("earnings", EarningsRow),
}


def write_report(report: ReportBundle, out_dir: Path) -> None:
    (out_dir / "report.json").write_bytes(report.to_json())
    for filename, (attribute, model) in TABLES.items():
        rows = [row.model_dump(mode="json") for row in getattr(report, attribute)]
        frame = pd.DataFrame(rows, columns=list(model.model_fields))
        frame.to_csv(out_dir / filename, index=False, lineterminator="\n")
    logger.debug(f"Report tables written to {out_dir}")
