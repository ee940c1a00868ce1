"""
VPP coalition formation: constraint filtering followed by a minimum-cost cover
of the service capacity.
"""

import logging
from collections.abc import Sequence

from gridchain.contracts.models import AssetRecord, ServiceSpec
from gridchain.oracle.flexibility import select_flexibility
from gridchain.oracle.models import CoalitionMember, CoalitionPlan, FlexCandidate

logger = logging.getLogger(__name__)


def candidate_id(asset_id: int) -> str:
    # Zero-padded so id order and numeric order agree
    return f"{asset_id:08d}"


def form_coalition(
    assets: Sequence[AssetRecord],
    service: ServiceSpec,
    exact_limit_wh: int | None = None,
) -> CoalitionPlan:
    excluded: dict[int, str] = {}
    survivors: list[AssetRecord] = []
    for asset in assets:
        violation = service.admits(asset)
        if violation is None:
            survivors.append(asset)
        else:
            excluded[asset.asset_id] = violation

    candidates = [
        FlexCandidate(
            id=candidate_id(a.asset_id),
            flex_wh=a.capacity_wh_per_slot,
            cost=a.cost_rate * service.dispatch_slots,
        )
        for a in survivors
    ]
    selection = select_flexibility(candidates, service.capacity_wh_per_slot, exact_limit_wh)
    if not selection.feasible:
        logger.info(
            f"Service {service.service_id}: no coalition from {len(survivors)} eligible assets"
        )
        return CoalitionPlan(service=service, feasible=False, excluded=excluded)

    by_id = {candidate_id(a.asset_id): a for a in survivors}
    members: list[CoalitionMember] = []
    residual = service.capacity_wh_per_slot
    for chosen in sorted(selection.chosen):
        asset = by_id[chosen]
        scheduled = min(asset.capacity_wh_per_slot, residual)
        members.append(CoalitionMember(asset_id=asset.asset_id, scheduled_wh=scheduled))
        residual -= scheduled

    return CoalitionPlan(
        service=service,
        feasible=True,
        optimal=selection.optimal,
        members=tuple(members),
        total_scheduled_wh=sum(m.scheduled_wh for m in members),
        total_cost=selection.total_cost,
        excluded=excluded,
    )
