"""
Simulated Network
Immutable node messages and a deterministic, seeded message bus
"""

import heapq
import logging
import random
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, replace
from typing import Union

from gridchain.ledger.primitives import Block, Transaction

logger = logging.getLogger(__name__)

# Sender id used for transactions submitted by prosumers, actors and the oracle
CLIENT = -1


@dataclass(frozen=True)
class BlockAnnounce:
    block: Block


@dataclass(frozen=True)
class TxSubmit:
    tx: Transaction


@dataclass(frozen=True)
class ChainRequest:
    from_height: int


@dataclass(frozen=True)
class ChainResponse:
    blocks: tuple[Block, ...]


MessageBody = Union[BlockAnnounce, TxSubmit, ChainRequest, ChainResponse]


@dataclass(frozen=True)
class NodeMessage:
    sender: int
    recipient: int
    body: MessageBody
    sent_at_tick: int
    deliver_at_tick: int

    def __post_init__(self) -> None:
        if self.deliver_at_tick < self.sent_at_tick:
            raise ValueError("a message cannot be delivered before it is sent")


class MessageBus:
    """Per-recipient queues ordered by (delivery tick, send sequence)"""

    def __init__(
        self,
        delay_ticks: int = 0,
        jitter_ticks: int = 0,
        drop_probability: float = 0.0,
        seed: int = 0,
    ) -> None:
        if delay_ticks < 0 or jitter_ticks < 0:
            raise ValueError("delays must be non-negative")
        if not 0.0 <= drop_probability < 1.0:
            raise ValueError("drop probability must be in [0, 1)")
        self.delay_ticks = delay_ticks
        self.jitter_ticks = jitter_ticks
        self.drop_probability = drop_probability
        self._rng = random.Random(seed)
        self._queues: dict[int, list[tuple[int, int, NodeMessage]]] = defaultdict(list)
        self._seq = 0
        self.sent = 0
        self.dropped = 0

    def _enqueue(self, message: NodeMessage) -> None:
        heapq.heappush(
            self._queues[message.recipient], (message.deliver_at_tick, self._seq, message)
        )
        self._seq += 1
        self.sent += 1

    def post(self, message: NodeMessage) -> None:
        """Schedule a gossip message; delay, jitter and drops apply"""
        if self.drop_probability and self._rng.random() < self.drop_probability:
            self.dropped += 1
            logger.debug(f"Dropped {type(message.body).__name__} {message.sender}->{message.recipient}")
            return
        delay = self.delay_ticks
        if self.jitter_ticks:
            delay += self._rng.randint(0, self.jitter_ticks)
        self._enqueue(replace(message, deliver_at_tick=message.sent_at_tick + delay))

    def submit(self, tx: Transaction, recipients: Iterable[int], tick: int) -> None:
        """Client submission: reliable, eligible from the next tick"""
        for recipient in recipients:
            self._enqueue(NodeMessage(CLIENT, recipient, TxSubmit(tx), tick, tick + 1))

    def deliver(self, recipient: int, tick: int) -> list[NodeMessage]:
        queue = self._queues[recipient]
        delivered = []
        while queue and queue[0][0] <= tick:
            delivered.append(heapq.heappop(queue)[2])
        return delivered

    def has_deliverable(self, recipient: int, tick: int) -> bool:
        queue = self._queues[recipient]
        return bool(queue) and queue[0][0] <= tick

    @property
    def in_flight(self) -> int:
        return sum(len(queue) for queue in self._queues.values())
