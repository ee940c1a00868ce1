"""
Network Simulation
Drives a set of validator nodes over the message bus, one tick at a time
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from gridchain.ledger.crypto import KeyPair
from gridchain.ledger.genesis import Genesis, build_genesis_block
from gridchain.ledger.network import MessageBus
from gridchain.ledger.node import ChainView, ValidatorNode
from gridchain.ledger.primitives import Block, Transaction

logger = logging.getLogger(__name__)

# Upper bound on gossip rounds inside one tick; zero-delay gossip settles in a few
MAX_ROUNDS = 1_000


@dataclass
class ConvergenceLog:
    """When each block was proposed and when every node first held it"""

    proposed_at: dict[bytes, int] = field(default_factory=dict)
    held_by: dict[bytes, dict[int, int]] = field(default_factory=dict)
    # (tick, height) pairs where two nodes held different blocks
    divergences: list[tuple[int, int]] = field(default_factory=list)

    def lag(self, block_hash: bytes) -> int | None:
        """Ticks until the last node held the block, None if some node never did"""
        holders = self.held_by.get(block_hash, {})
        if block_hash not in self.proposed_at or not holders:
            return None
        return max(holders.values()) - self.proposed_at[block_hash]

    def max_lag(self, node_count: int) -> int | None:
        lags = []
        for block_hash in self.proposed_at:
            if len(self.held_by.get(block_hash, {})) < node_count:
                return None
            lags.append(self.lag(block_hash) or 0)
        return max(lags, default=0)


class NetworkSimulation:
    """Validators plus the bus; ``run_tick`` delivers until the tick is quiet"""

    def __init__(
        self,
        genesis: Genesis,
        validator_keys: Sequence[KeyPair],
        bus: MessageBus,
        heartbeat_ticks: int = 0,
    ) -> None:
        if not validator_keys:
            raise ValueError("a network needs at least one validator")
        self.genesis = genesis
        self.bus = bus
        self.heartbeat_ticks = heartbeat_ticks
        self.genesis_block: Block = build_genesis_block(genesis, validator_keys[0])
        ids = list(range(len(validator_keys)))
        self.nodes = [
            ValidatorNode(i, genesis, self.genesis_block, key=key, peers=ids)
            for i, key in enumerate(validator_keys)
        ]
        self.log = ConvergenceLog()
        self.tick = 0

    @property
    def node_ids(self) -> list[int]:
        return [node.node_id for node in self.nodes]

    def view(self, node_id: int = 0) -> ChainView:
        return self.nodes[node_id].view()

    def submit(self, transactions: Iterable[Transaction], tick: int) -> None:
        for tx in transactions:
            self.bus.submit(tx, self.node_ids, tick)

    def run_tick(self, tick: int, propose: bool = True) -> None:
        self.tick = tick
        if self.heartbeat_ticks and tick % self.heartbeat_ticks == 0:
            # Re-announce tips so nodes that missed a dropped block can catch up
            for node in self.nodes:
                if node.tip.height > 0:
                    for message in node.announce_tip(tick):
                        self.bus.post(message)

        active = list(self.nodes)
        for _ in range(MAX_ROUNDS):
            for node in active:
                outbox = node.step(self.bus.deliver(node.node_id, tick), tick, propose)
                for message in outbox:
                    self.bus.post(message)
            active = [n for n in self.nodes if self.bus.has_deliverable(n.node_id, tick)]
            if not active:
                break
        else:
            logger.warning(f"Gossip did not settle within {MAX_ROUNDS} rounds at tick {tick}")
        self._record(tick)

    def settle(self, max_ticks: int) -> int:
        """Deliver what is still on the bus without new proposals; returns the last tick run"""
        end = self.tick + max_ticks
        while self.bus.in_flight and self.tick < end:
            self.run_tick(self.tick + 1, propose=False)
        if self.bus.in_flight:
            logger.warning(f"{self.bus.in_flight} messages still in flight at tick {self.tick}")
        return self.tick

    def _record(self, tick: int) -> None:
        for node in self.nodes:
            for block in node.chain[1:]:
                holders = self.log.held_by.setdefault(block.hash, {})
                holders.setdefault(node.node_id, tick)
                self.log.proposed_at.setdefault(block.hash, block.tick)

        tallest = max(len(node.chain) for node in self.nodes)
        for height in range(1, tallest):
            hashes = {node.chain[height].hash for node in self.nodes if height < len(node.chain)}
            if len(hashes) > 1:
                self.log.divergences.append((tick, height))

    def tips(self) -> list[Block]:
        return [node.tip for node in self.nodes]

    def converged(self) -> bool:
        return len({tip.hash for tip in self.tips()}) == 1

    def canonical_chain(self) -> list[Block]:
        """Chain of the node with the best tip under the fork-choice rule"""
        best = min(self.nodes, key=lambda n: (-len(n.chain), n.tip.hash))
        return list(best.chain)
