"""
Validator Node
A logical node holding a replica of the chain: validates announced blocks,
proposes at its turn, keeps a mempool, and serves read-only chain views
"""

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any

from gridchain.contracts.models import EnergyReading, OracleRequestRecord
from gridchain.contracts.world import EMPTY_WORLD, Receipt, WorldState
from gridchain.ledger.consensus import assemble_block, validate_block
from gridchain.ledger.crypto import Address, KeyPair
from gridchain.ledger.genesis import Genesis
from gridchain.ledger.network import (
    BlockAnnounce,
    ChainRequest,
    ChainResponse,
    MessageBody,
    NodeMessage,
    TxSubmit,
)
from gridchain.ledger.primitives import Block, Transaction, TxKind, verify_transaction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChainView:
    """Read-only snapshot of one node's chain"""

    genesis: Genesis
    tip: Block
    world: WorldState
    readings: Mapping[Address, Mapping[int, int]]

    @property
    def height(self) -> int:
        return self.tip.height

    @property
    def tick(self) -> int:
        return self.tip.tick

    def contract(self, address: Address) -> Any:
        return self.world.contract(address)

    def contracts_of(self, kind: str) -> Iterator[tuple[Address, Any]]:
        return self.world.contracts_of(kind)

    def requests_by(self, requester: Address) -> list[OracleRequestRecord]:
        requests = self.world.oracle_requests
        return [requests[i] for i in sorted(requests) if requests[i].requester == requester]

    def device_readings(self, device: Address) -> Mapping[int, int]:
        return self.readings.get(device, MappingProxyType({}))

    def reading_series(self, device: Address, start: int, end: int) -> list[int] | None:
        """Readings for slots [start, end), or None if any slot is missing"""
        readings = self.device_readings(device)
        if any(slot not in readings for slot in range(start, end)):
            return None
        return [readings[slot] for slot in range(start, end)]


@dataclass
class NodeStats:
    proposed: int = 0
    adopted: int = 0
    reorgs: int = 0
    dropped_messages: int = 0
    rejected: dict[str, int] = field(default_factory=dict)


def _index_readings(
    index: dict[Address, dict[int, int]], block: Block, receipts: Sequence[Receipt]
) -> None:
    for tx, receipt in zip(block.transactions, receipts):
        if receipt.ok and tx.kind is TxKind.METER_UPDATE:
            reading = EnergyReading.model_validate_json(tx.payload)
            index.setdefault(reading.device, {})[reading.slot] = reading.energy_wh


class ValidatorNode:
    """One replica; a node with ``key`` set is a validator and proposes at its turn"""

    def __init__(
        self,
        node_id: int,
        genesis: Genesis,
        genesis_block: Block,
        key: KeyPair | None = None,
        peers: Sequence[int] = (),
    ) -> None:
        self.node_id = node_id
        self.genesis = genesis
        self.key = key
        self.peers = tuple(p for p in peers if p != node_id)
        self.chain: list[Block] = [genesis_block]
        self.worlds: list[WorldState] = [EMPTY_WORLD]
        self.receipts: list[tuple[Receipt, ...]] = [()]
        self.mempool: dict[bytes, Transaction] = {}
        self.stats = NodeStats()
        self._readings: dict[Address, dict[int, int]] = {}
        self._last_proposal_tick = -1

    @property
    def tip(self) -> Block:
        return self.chain[-1]

    @property
    def world(self) -> WorldState:
        return self.worlds[-1]

    def view(self) -> ChainView:
        readings = {
            device: MappingProxyType(dict(slots)) for device, slots in self._readings.items()
        }
        return ChainView(self.genesis, self.tip, self.world, MappingProxyType(readings))

    # ------------------------------------------------------------------ inbox

    def step(
        self, inbox: Sequence[NodeMessage], tick: int, propose: bool = True
    ) -> list[NodeMessage]:
        outbox: list[NodeMessage] = []
        for message in inbox:
            body = message.body
            if isinstance(body, TxSubmit):
                self._admit(body.tx)
            elif isinstance(body, BlockAnnounce):
                outbox += self._on_block(body.block, message.sender, tick)
            elif isinstance(body, ChainRequest):
                blocks = tuple(self.chain[max(body.from_height, 1) :])
                if blocks:
                    outbox.append(self._message(message.sender, ChainResponse(blocks), tick))
            elif isinstance(body, ChainResponse):
                if body.blocks and self._consider(body.blocks):
                    outbox += self.announce_tip(tick)
            else:
                self.stats.dropped_messages += 1

        if propose and self._my_turn(tick):
            outbox += self._propose(tick)
        return outbox

    def _message(self, recipient: int, body: MessageBody, tick: int) -> NodeMessage:
        return NodeMessage(self.node_id, recipient, body, tick, tick)

    def announce_tip(self, tick: int) -> list[NodeMessage]:
        return [self._message(peer, BlockAnnounce(self.tip), tick) for peer in self.peers]

    def _admit(self, tx: Transaction) -> None:
        if tx.hash in self.mempool:
            return
        if tx.nonce < self.world.nonce_of(tx.sender) or not verify_transaction(
            tx, self.genesis.key_registry
        ):
            self.stats.dropped_messages += 1
            return
        self.mempool[tx.hash] = tx

    def _on_block(self, block: Block, sender: int, tick: int) -> list[NodeMessage]:
        if block.height < len(self.chain) and self.chain[block.height].hash == block.hash:
            return []
        if block.height > self.tip.height + 1:
            # Gap: ask the announcer for everything after our tip
            return [self._message(sender, ChainRequest(self.tip.height + 1), tick)]
        if self._consider((block,)):
            return self.announce_tip(tick)
        return []

    # ------------------------------------------------------------ fork choice

    def _consider(self, blocks: Sequence[Block]) -> bool:
        """Adopt ``blocks`` if they extend a prefix of our chain into a better one"""
        blocks = list(blocks)
        while (
            blocks
            and blocks[0].height < len(self.chain)
            and self.chain[blocks[0].height].hash == blocks[0].hash
        ):
            blocks.pop(0)
        if not blocks:
            return False
        first = blocks[0].height
        if first < 1 or first > len(self.chain):
            return False

        candidate_length = first + len(blocks)
        if candidate_length < len(self.chain):
            return False
        if candidate_length == len(self.chain) and blocks[-1].hash >= self.tip.hash:
            return False

        parent, world = self.chain[first - 1], self.worlds[first - 1]
        worlds, receipts = [], []
        for block in blocks:
            verdict = validate_block(parent, block, self.genesis, world)
            if not verdict.accepted:
                reason = verdict.reason.value if verdict.reason else "unknown"
                self.stats.dropped_messages += 1
                self.stats.rejected[reason] = self.stats.rejected.get(reason, 0) + 1
                logger.warning(f"[Node {self.node_id}] rejected block {block.height}: {reason}")
                return False
            assert verdict.world is not None
            worlds.append(verdict.world)
            receipts.append(verdict.receipts)
            parent, world = block, verdict.world

        self._adopt(first, blocks, worlds, receipts)
        return True

    def _adopt(
        self,
        first: int,
        blocks: Sequence[Block],
        worlds: Sequence[WorldState],
        receipts: Sequence[tuple[Receipt, ...]],
    ) -> None:
        reorg = first < len(self.chain)
        del self.chain[first:], self.worlds[first:], self.receipts[first:]
        self.chain.extend(blocks)
        self.worlds.extend(worlds)
        self.receipts.extend(receipts)
        self.stats.adopted += len(blocks)

        if reorg:
            self.stats.reorgs += 1
            self._readings = {}
            for block, block_receipts in zip(self.chain, self.receipts):
                _index_readings(self._readings, block, block_receipts)
        else:
            for block, block_receipts in zip(blocks, receipts):
                _index_readings(self._readings, block, block_receipts)

        world = self.world
        self.mempool = {
            h: tx for h, tx in self.mempool.items() if tx.nonce >= world.nonce_of(tx.sender)
        }
        logger.debug(f"[Node {self.node_id}] tip is now {self.tip.height} ({self.tip.hash.hex()[:12]})")

    # --------------------------------------------------------------- proposal

    def _my_turn(self, tick: int) -> bool:
        return (
            self.key is not None
            and self._last_proposal_tick != tick
            and tick > self.tip.tick
            and self.genesis.validator_set.scheduled(self.tip.height + 1) == self.key.address
        )

    def _propose(self, tick: int) -> list[NodeMessage]:
        assert self.key is not None
        self._last_proposal_tick = tick
        block, world, receipts = assemble_block(
            self.tip, self.world, self.mempool.values(), self.key, tick, self.genesis
        )
        self._adopt(len(self.chain), [block], [world], [receipts])
        self.stats.proposed += 1
        return self.announce_tip(tick)


def node_step(
    node: ValidatorNode, inbox: Sequence[NodeMessage], tick: int
) -> tuple[ValidatorNode, list[NodeMessage]]:
    """Advance ``node`` by one tick; the node is updated in place and returned"""
    outbox = node.step(inbox, tick)
    return node, outbox
