"""
Demand-response contract between an aggregator and one prosumer.

Orders ask for a per-slot load adjustment relative to the prosumer's baseline;
settlement pays for delivered flexibility and charges for the shortfall.
"""

from collections.abc import Sequence

from gridchain.contracts.models import (
    BaselineProfile,
    Direction,
    DRContractState,
    EnergyReading,
    FlexibilityOrder,
    Settlement,
)
from gridchain.contracts.payloads import DRInit, IssueOrderBody
from gridchain.errors import ContractError
from gridchain.ledger.crypto import Address


def deploy_dr(init: DRInit, aggregator: Address, slots_per_day: int) -> DRContractState:
    if len(init.baseline) != slots_per_day:
        raise ContractError(
            f"baseline has {len(init.baseline)} slots, expected {slots_per_day}"
        )
    return DRContractState(
        prosumer=init.prosumer,
        aggregator=aggregator,
        meter=init.meter,
        congestion_point=init.congestion_point,
        baseline=BaselineProfile(slot_wh=init.baseline),
    )


def dr_issue_order(
    state: DRContractState,
    order: IssueOrderBody,
    sender: Address,
    tick: int,
) -> DRContractState:
    if sender != state.aggregator:
        raise ContractError("only the aggregator may issue orders")
    if order.window_start >= order.window_end:
        raise ContractError("order window must satisfy start < end")
    if order.window_start <= tick:
        raise ContractError(f"order window starts at {order.window_start}, not after tick {tick}")
    if order.amount_wh <= 0:
        raise ContractError("order amount must be positive")
    if order.incentive_rate < 0 or order.penalty_rate < 0:
        raise ContractError("rates must be non-negative")
    for existing in state.orders:
        if not state.is_settled(existing.id) and existing.overlaps(
            order.window_start, order.window_end
        ):
            raise ContractError(f"window overlaps unsettled order {existing.id}")

    stored = FlexibilityOrder(
        id=state.next_order_id,
        window_start=order.window_start,
        window_end=order.window_end,
        direction=order.direction,
        amount_wh=order.amount_wh,
        incentive_rate=order.incentive_rate,
        penalty_rate=order.penalty_rate,
        congestion_point=order.congestion_point,
        baseline_wh=tuple(
            state.baseline.at(slot) for slot in range(order.window_start, order.window_end)
        ),
        issued_tick=tick,
    )
    return state.model_copy(
        update={"orders": (*state.orders, stored), "next_order_id": state.next_order_id + 1}
    )


def compute_settlement(
    order: FlexibilityOrder,
    metered: Sequence[EnergyReading],
    tick: int,
) -> Settlement:
    """Straight settlement arithmetic over a complete set of window readings"""
    by_slot = {r.slot: r.energy_wh for r in metered}
    delivered = 0
    for offset, slot in enumerate(order.slots):
        deviation = order.baseline_wh[offset] - by_slot[slot]
        if order.direction is Direction.INCREASE:
            deviation = -deviation
        delivered += min(max(deviation, 0), order.amount_wh)

    shortfall = order.ordered_total_wh - delivered
    reward = order.incentive_rate * delivered // 1000
    penalty = order.penalty_rate * shortfall // 1000
    return Settlement(
        order_id=order.id,
        delivered_wh=delivered,
        shortfall_wh=shortfall,
        reward=reward,
        penalty=penalty,
        net=reward - penalty,
        settled_tick=tick,
    )


def dr_settle(
    state: DRContractState,
    order_id: int,
    metered: Sequence[EnergyReading],
    tick: int,
) -> tuple[DRContractState, Settlement]:
    order = state.order(order_id)
    if order is None:
        raise ContractError(f"unknown order {order_id}")
    if state.is_settled(order_id):
        raise ContractError(f"order {order_id} already settled")
    if tick < order.window_end:
        raise ContractError(f"window of order {order_id} has not elapsed")

    slots = [r.slot for r in metered]
    if len(set(slots)) != len(slots) or set(slots) != set(order.slots):
        raise ContractError("metered readings must cover every window slot exactly once")
    if any(r.device != state.meter for r in metered):
        raise ContractError("metered readings come from a different meter")

    settlement = compute_settlement(order, metered, tick)
    return state.model_copy(update={"settlements": (*state.settlements, settlement)}), settlement
