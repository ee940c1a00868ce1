"""
Virtual power plant contract: asset registry, coalition dispatches and their
settlement.
"""

from collections.abc import Sequence

from gridchain.contracts.models import (
    AssetRecord,
    BaselineProfile,
    DispatchMember,
    DispatchRecord,
    MemberSettlement,
    VPPContractState,
    VPPSettlement,
)
from gridchain.contracts.payloads import (
    DeliveredEnergy,
    DispatchBody,
    RegisterAssetBody,
)
from gridchain.errors import ContractError
from gridchain.ledger.crypto import Address


def vpp_register_asset(
    state: VPPContractState,
    asset: RegisterAssetBody,
    sender: Address,
    slots_per_day: int,
) -> VPPContractState:
    if sender != asset.owner:
        raise ContractError("only the asset owner may register it")
    if len(asset.baseline) != slots_per_day:
        raise ContractError(f"asset baseline must have {slots_per_day} slots")
    if any(a.meter == asset.meter for a in state.assets):
        raise ContractError(f"meter {asset.meter} is already registered")
    if (
        asset.capacity_wh_per_slot <= 0
        or asset.max_dispatch_slots <= 0
        or asset.response_time_slots < 0
        or asset.sync_time_slots < 0
        or asset.cost_rate < 0
    ):
        raise ContractError("asset parameters out of range")

    record = AssetRecord(
        asset_id=len(state.assets),
        owner=asset.owner,
        meter=asset.meter,
        baseline=BaselineProfile(slot_wh=asset.baseline),
        capacity_wh_per_slot=asset.capacity_wh_per_slot,
        response_time_slots=asset.response_time_slots,
        sync_time_slots=asset.sync_time_slots,
        max_dispatch_slots=asset.max_dispatch_slots,
        band=asset.band,
        cost_rate=asset.cost_rate,
    )
    return state.model_copy(update={"assets": (*state.assets, record)})


def vpp_record_dispatch(
    state: VPPContractState,
    dispatch: DispatchBody,
    sender: Address,
    oracle: Address,
    tick: int,
) -> VPPContractState:
    service = dispatch.service
    if sender not in (oracle, state.operator):
        raise ContractError("only the oracle or the operator may record dispatches")
    if state.dispatch(service.service_id) is not None:
        raise ContractError(f"service {service.service_id} already dispatched")
    if dispatch.window_start <= tick:
        raise ContractError("dispatch window must start in the future")
    if not dispatch.members:
        raise ContractError("dispatch has no members")

    window_end = dispatch.window_start + service.dispatch_slots
    seen: set[int] = set()
    members: list[DispatchMember] = []
    for allocation in dispatch.members:
        asset = state.asset(allocation.asset_id)
        if asset is None:
            raise ContractError(f"asset {allocation.asset_id} is not registered")
        if allocation.asset_id in seen:
            raise ContractError(f"asset {allocation.asset_id} listed twice")
        seen.add(allocation.asset_id)
        violation = service.admits(asset)
        if violation is not None:
            raise ContractError(f"asset {asset.asset_id} violates {violation} constraint")
        if not 0 < allocation.scheduled_wh <= asset.capacity_wh_per_slot:
            raise ContractError(f"asset {asset.asset_id} scheduled beyond its capacity")
        for other in state.dispatches:
            busy = any(m.asset_id == asset.asset_id for m in other.members)
            if busy and other.overlaps(dispatch.window_start, window_end):
                raise ContractError(f"asset {asset.asset_id} is already dispatched then")
        members.append(
            DispatchMember(
                asset_id=asset.asset_id,
                owner=asset.owner,
                scheduled_wh=allocation.scheduled_wh,
            )
        )

    if sum(m.scheduled_wh for m in members) < service.capacity_wh_per_slot:
        raise ContractError("coalition does not cover the service capacity")

    record = DispatchRecord(
        service=service,
        window_start=dispatch.window_start,
        window_end=window_end,
        members=tuple(members),
        recorded_tick=tick,
    )
    return state.model_copy(update={"dispatches": (*state.dispatches, record)})


def settle_member(
    member: DispatchMember,
    record: DispatchRecord,
    delivered_wh: int,
    cost_rate: int,
) -> MemberSettlement:
    scheduled_total = member.scheduled_wh * record.service.dispatch_slots
    credited = min(max(delivered_wh, 0), scheduled_total)
    shortfall = scheduled_total - credited
    payout = cost_rate * credited // 1000
    penalty = record.service.penalty_rate * shortfall // 1000
    return MemberSettlement(
        asset_id=member.asset_id,
        owner=member.owner,
        scheduled_wh=scheduled_total,
        delivered_wh=delivered_wh,
        credited_wh=credited,
        shortfall_wh=shortfall,
        payout=payout,
        penalty=penalty,
        net=payout - penalty,
    )


def vpp_settle(
    state: VPPContractState,
    service_id: str,
    delivered: Sequence[DeliveredEnergy],
    sender: Address,
    tick: int,
) -> tuple[VPPContractState, VPPSettlement]:
    if sender != state.operator:
        raise ContractError("only the operator may settle")
    record = state.dispatch(service_id)
    if record is None:
        raise ContractError(f"unknown service {service_id}")
    if any(s.service_id == service_id for s in state.settlements):
        raise ContractError(f"service {service_id} already settled")
    if tick < record.window_end:
        raise ContractError(f"window of service {service_id} has not elapsed")

    by_asset = {d.asset_id: d.delivered_wh for d in delivered}
    if len(by_asset) != len(delivered) or set(by_asset) != {m.asset_id for m in record.members}:
        raise ContractError("delivered energy must be reported once per member")

    members = []
    filled = []
    for member in record.members:
        asset = state.asset(member.asset_id)
        assert asset is not None
        members.append(settle_member(member, record, by_asset[member.asset_id], asset.cost_rate))
        filled.append(member.model_copy(update={"delivered_wh": by_asset[member.asset_id]}))

    settlement = VPPSettlement(
        service_id=service_id,
        members=tuple(members),
        total_payout=sum(m.payout for m in members),
        total_penalty=sum(m.penalty for m in members),
        settled_tick=tick,
    )
    dispatches = tuple(
        d.model_copy(update={"members": tuple(filled)}) if d.service_id == service_id else d
        for d in state.dispatches
    )
    updated = state.model_copy(
        update={"dispatches": dispatches, "settlements": (*state.settlements, settlement)}
    )
    return updated, settlement
