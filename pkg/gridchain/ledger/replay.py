"""
Chain replay: validates every link and state root from genesis forward.
"""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

from gridchain.contracts.world import EMPTY_WORLD, Receipt, WorldState
from gridchain.errors import ReplayError
from gridchain.ledger.consensus import validate_block
from gridchain.ledger.genesis import Genesis, check_genesis_block
from gridchain.ledger.primitives import Block


@dataclass(frozen=True)
class ReplayStep:
    block: Block
    world: WorldState
    receipts: tuple[Receipt, ...]


def replay_blocks(blocks: Sequence[Block], genesis: Genesis) -> Iterator[ReplayStep]:
    """Yield each validated block with its post-state; raise at the first bad one"""
    if not blocks:
        raise ReplayError(0, "missing-genesis")
    reason = check_genesis_block(blocks[0], genesis)
    if reason is not None:
        raise ReplayError(0, reason)

    parent, world = blocks[0], EMPTY_WORLD
    yield ReplayStep(parent, world, ())
    for index, block in enumerate(blocks[1:], start=1):
        if block.height != index:
            raise ReplayError(index, "bad-height")
        verdict = validate_block(parent, block, genesis, world)
        if not verdict.accepted:
            assert verdict.reason is not None
            raise ReplayError(index, verdict.reason.value)
        assert verdict.world is not None
        parent, world = block, verdict.world
        yield ReplayStep(block, world, verdict.receipts)


def replay_chain(blocks: Sequence[Block], genesis: Genesis) -> WorldState:
    world = EMPTY_WORLD
    for step in replay_blocks(blocks, genesis):
        world = step.world
    return world
