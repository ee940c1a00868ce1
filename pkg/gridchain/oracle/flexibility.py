"""
Flexibility Subset Selection
Minimum-cost set of candidates covering a target, exact by dynamic
programming, with a greedy fallback for very large instances
"""

import logging
from collections.abc import Sequence
from fractions import Fraction

import numpy as np

from gridchain.errors import OracleServiceError
from gridchain.oracle.models import FlexCandidate, FlexSelection
from gridchain.utils.config import get_settings

logger = logging.getLogger(__name__)

UNREACHABLE = np.int64(2**62)


def _decisions(candidates: Sequence[FlexCandidate], bound: int) -> tuple[np.ndarray, np.ndarray]:
    """Min cost per exact sum over all candidates, plus packed take bits per candidate

    Candidates are folded in from the back, so bit s of row i is set when taking
    candidates[i] is at least as cheap as skipping it for sum s over candidates[i:].
    """
    best = np.full(bound + 1, UNREACHABLE, dtype=np.int64)
    best[0] = 0
    take = np.zeros((len(candidates), (bound + 8) // 8), dtype=np.uint8)
    row = np.zeros(bound + 1, dtype=bool)
    for i in range(len(candidates) - 1, -1, -1):
        f, cost = candidates[i].flex_wh, candidates[i].cost
        if f > bound:
            continue
        shifted = best[: bound + 1 - f] + cost
        row[:f] = False
        np.less_equal(shifted, best[f:], out=row[f:])
        take[i] = np.packbits(row)
        np.minimum(best[f:], shifted, out=best[f:])
        np.minimum(best, UNREACHABLE, out=best)
    return best, take


def _taken(take: np.ndarray, i: int, s: int) -> bool:
    return bool((take[i, s >> 3] >> (7 - (s & 7))) & 1)


def _select_exact(candidates: Sequence[FlexCandidate], target_wh: int) -> FlexSelection:
    ranked = sorted(candidates, key=lambda c: c.id)
    # An optimal cover never overshoots the target by a whole member's flexibility
    bound = min(target_wh + max(c.flex_wh for c in ranked) - 1, sum(c.flex_wh for c in ranked))
    best, take = _decisions(ranked, bound)

    window = best[target_wh:]
    cost = int(window.min())
    total = target_wh + int(np.argmax(window == cost))

    # Walk ids in order, taking each one whenever that stays optimal; this
    # yields the lexicographically smallest id set among the optima
    chosen: list[str] = []
    remaining_wh, remaining_cost = total, cost
    for i, candidate in enumerate(ranked):
        if remaining_wh == 0:
            break
        if candidate.flex_wh <= remaining_wh and _taken(take, i, remaining_wh):
            chosen.append(candidate.id)
            remaining_wh -= candidate.flex_wh
            remaining_cost -= candidate.cost
    assert remaining_wh == 0 and remaining_cost == 0

    return FlexSelection(
        target_wh=target_wh,
        feasible=True,
        chosen=tuple(chosen),
        total_wh=total,
        total_cost=cost,
    )


def _select_greedy(candidates: Sequence[FlexCandidate], target_wh: int) -> FlexSelection:
    ranked = sorted(candidates, key=lambda c: (Fraction(c.cost, c.flex_wh), c.id))
    chosen: list[FlexCandidate] = []
    covered = 0
    for candidate in ranked:
        if covered >= target_wh:
            break
        chosen.append(candidate)
        covered += candidate.flex_wh

    # Drop members that turned out to be unnecessary, most expensive first
    for candidate in sorted(chosen, key=lambda c: (-c.cost, c.id)):
        if covered - candidate.flex_wh >= target_wh:
            chosen.remove(candidate)
            covered -= candidate.flex_wh

    return FlexSelection(
        target_wh=target_wh,
        feasible=True,
        optimal=False,
        chosen=tuple(sorted(c.id for c in chosen)),
        total_wh=covered,
        total_cost=sum(c.cost for c in chosen),
    )


def select_flexibility(
    candidates: Sequence[FlexCandidate],
    target_wh: int,
    exact_limit_wh: int | None = None,
) -> FlexSelection:
    """Cheapest subset whose flexibility covers ``target_wh``

    Ties go to the smaller total, then to the lexicographically smaller id set.
    Above ``exact_limit_wh`` of total flexibility the greedy result is returned
    with ``optimal=False``.
    """
    if target_wh < 0:
        raise OracleServiceError("target must be non-negative")
    ids = [c.id for c in candidates]
    if len(set(ids)) != len(ids):
        raise OracleServiceError("candidate ids must be unique")
    if target_wh == 0:
        return FlexSelection(target_wh=0, feasible=True)

    available = sum(c.flex_wh for c in candidates)
    if available < target_wh:
        logger.info(f"Flexibility infeasible: {available} Wh available, {target_wh} Wh needed")
        return FlexSelection(target_wh=target_wh, feasible=False)

    limit = exact_limit_wh if exact_limit_wh is not None else get_settings().flex_exact_limit_wh
    if available > limit:
        logger.info(f"{available} Wh of flexibility exceeds {limit}; using greedy selection")
        return _select_greedy(candidates, target_wh)
    return _select_exact(candidates, target_wh)
