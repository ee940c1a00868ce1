"""
Proof-of-Authority Block Production and Validation
Round-robin schedule by height; every block is re-executed by its validators
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import Enum

from gridchain.contracts.vm import exec_transaction
from gridchain.contracts.world import ExecutionContext, Receipt, WorldState
from gridchain.errors import ScheduleError
from gridchain.ledger.crypto import Address, KeyPair
from gridchain.ledger.genesis import Genesis
from gridchain.ledger.primitives import (
    Block,
    Transaction,
    sign_block,
    verify_block_signature,
    verify_transaction,
)

logger = logging.getLogger(__name__)


class RejectReason(str, Enum):
    WRONG_AUTHORITY = "wrong-authority"
    BAD_PREV_HASH = "bad-prev-hash"
    BAD_SIGNATURE = "bad-signature"
    BAD_STATE_ROOT = "bad-state-root"
    BAD_TX = "bad-tx"
    BAD_HEIGHT = "bad-height"
    BAD_TICK = "bad-tick"


@dataclass(frozen=True)
class BlockVerdict:
    accepted: bool
    reason: RejectReason | None = None
    world: WorldState | None = None
    receipts: tuple[Receipt, ...] = field(default_factory=tuple)


def tx_order_key(tx: Transaction) -> tuple[bytes, int, bytes]:
    return tx.sender.value, tx.nonce, tx.hash


def execute_transactions(
    world: WorldState, transactions: Iterable[Transaction], ctx: ExecutionContext
) -> tuple[WorldState, tuple[Receipt, ...]]:
    receipts = []
    for tx in transactions:
        world, receipt = exec_transaction(world, tx, ctx)
        receipts.append(receipt)
    return world, tuple(receipts)


def assemble_block(
    parent: Block,
    parent_world: WorldState,
    pending: Iterable[Transaction],
    authority: KeyPair,
    tick: int,
    genesis: Genesis,
) -> tuple[Block, WorldState, tuple[Receipt, ...]]:
    """Build, execute and sign the next block; returns its post-state too"""
    height = parent.height + 1
    if genesis.validator_set.scheduled(height) != authority.address:
        raise ScheduleError(f"{authority.address} is not scheduled for height {height}")
    if tick <= parent.tick:
        raise ScheduleError(f"tick {tick} does not follow parent tick {parent.tick}")

    included: list[Transaction] = []
    expected: dict[Address, int] = {}
    for tx in sorted(pending, key=tx_order_key):
        nonce = expected.get(tx.sender, parent_world.nonce_of(tx.sender))
        if tx.nonce != nonce or not verify_transaction(tx, genesis.key_registry):
            continue
        expected[tx.sender] = nonce + 1
        included.append(tx)

    world, receipts = execute_transactions(parent_world, included, genesis.context(height, tick))
    block = sign_block(
        Block(
            height=height,
            prev_hash=parent.hash,
            tick=tick,
            authority=authority.address,
            transactions=tuple(included),
            state_root=world.root,
        ),
        authority,
    )
    return block, world, receipts


def propose_block(
    parent: Block,
    parent_world: WorldState,
    pending: Iterable[Transaction],
    authority: KeyPair,
    tick: int,
    genesis: Genesis,
) -> Block:
    return assemble_block(parent, parent_world, pending, authority, tick, genesis)[0]


def _transactions_ok(block: Block, parent_world: WorldState, genesis: Genesis) -> bool:
    keys = [tx_order_key(tx) for tx in block.transactions]
    if keys != sorted(keys):
        return False
    expected: dict[Address, int] = {}
    for tx in block.transactions:
        nonce = expected.get(tx.sender, parent_world.nonce_of(tx.sender))
        if tx.nonce != nonce or not verify_transaction(tx, genesis.key_registry):
            return False
        expected[tx.sender] = nonce + 1
    return True


def validate_block(
    parent: Block,
    block: Block,
    genesis: Genesis,
    parent_world: WorldState,
) -> BlockVerdict:
    """Accept iff the block extends ``parent`` correctly and re-executes to its root"""
    reason: RejectReason | None = None
    if block.height != parent.height + 1:
        reason = RejectReason.BAD_HEIGHT
    elif block.prev_hash != parent.hash:
        reason = RejectReason.BAD_PREV_HASH
    elif block.tick <= parent.tick:
        reason = RejectReason.BAD_TICK
    elif block.authority != genesis.validator_set.scheduled(block.height):
        reason = RejectReason.WRONG_AUTHORITY
    elif not verify_block_signature(block, genesis.key_registry):
        reason = RejectReason.BAD_SIGNATURE
    elif not _transactions_ok(block, parent_world, genesis):
        reason = RejectReason.BAD_TX
    if reason is not None:
        return BlockVerdict(accepted=False, reason=reason)

    world, receipts = execute_transactions(
        parent_world, block.transactions, genesis.context(block.height, block.tick)
    )
    if world.root != block.state_root:
        return BlockVerdict(accepted=False, reason=RejectReason.BAD_STATE_ROOT)
    return BlockVerdict(accepted=True, world=world, receipts=receipts)
