"""
World State
Contract map, account nonces and balances, and the oracle request registry,
committed to by a canonical state root
"""

from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

from gridchain.contracts.models import (
    KIND_TAGS,
    ContractState,
    OracleRequestRecord,
)
from gridchain.ledger.codec import ByteWriter, canonical_json
from gridchain.ledger.crypto import Address, sha256
from gridchain.ledger.primitives import TxKind


@dataclass(frozen=True)
class ExecutionContext:
    """Block-level facts a contract may read"""

    tick: int
    height: int
    oracle: Address
    slots_per_day: int


@dataclass(frozen=True)
class Receipt:
    tx_hash: bytes
    kind: TxKind
    sender: Address
    ok: bool
    error: str | None = None
    created: Address | None = None
    request_id: int | None = None


@dataclass(frozen=True, eq=False)
class WorldState:
    contracts: Mapping[Address, ContractState] = field(default_factory=dict)
    nonces: Mapping[Address, int] = field(default_factory=dict)
    balances: Mapping[Address, int] = field(default_factory=dict)
    oracle_requests: Mapping[int, OracleRequestRecord] = field(default_factory=dict)
    next_request_id: int = 0

    def nonce_of(self, address: Address) -> int:
        return self.nonces.get(address, 0)

    def balance_of(self, address: Address) -> int:
        return self.balances.get(address, 0)

    def contract(self, address: Address) -> ContractState | None:
        return self.contracts.get(address)

    def contracts_of(self, kind: str) -> Iterator[tuple[Address, Any]]:
        for address in sorted(self.contracts):
            state = self.contracts[address]
            if state.kind == kind:
                yield address, state

    def pending_requests(self) -> list[OracleRequestRecord]:
        return [
            self.oracle_requests[i]
            for i in sorted(self.oracle_requests)
            if self.oracle_requests[i].status == "pending"
        ]

    def with_nonce_bumped(self, address: Address) -> "WorldState":
        nonces = dict(self.nonces)
        nonces[address] = nonces.get(address, 0) + 1
        return WorldState(
            self.contracts, nonces, self.balances, self.oracle_requests, self.next_request_id
        )

    def encode(self) -> bytes:
        """Canonical bytes; layout is frozen by the golden-root tests"""
        writer = ByteWriter().u32(len(self.contracts))
        for address in sorted(self.contracts):
            state = self.contracts[address]
            writer.raw(address.value).u8(KIND_TAGS[state.kind])
            writer.blob(canonical_json(state.model_dump(mode="json")))

        accounts = sorted(set(self.nonces) | set(self.balances))
        writer.u32(len(accounts))
        for address in accounts:
            writer.raw(address.value)
            writer.u64(self.nonce_of(address)).i64(self.balance_of(address))

        writer.u64(self.next_request_id).u32(len(self.oracle_requests))
        for request_id in sorted(self.oracle_requests):
            record = self.oracle_requests[request_id]
            writer.u64(request_id)
            writer.blob(canonical_json(record.model_dump(mode="json")))
        return writer.getvalue()

    @cached_property
    def root(self) -> bytes:
        return sha256(self.encode())


EMPTY_WORLD = WorldState()


def state_root(world: WorldState) -> bytes:
    return world.root


class StateTxn:
    """Scratch copy of the world for one transaction; discarded on failure"""

    def __init__(self, world: WorldState) -> None:
        self.contracts: dict[Address, ContractState] = dict(world.contracts)
        self.nonces = dict(world.nonces)
        self.balances = dict(world.balances)
        self.requests = dict(world.oracle_requests)
        self.next_request_id = world.next_request_id

    def transfer(self, payer: Address, payee: Address, amount: int) -> None:
        """Move milli-currency; negative amounts flow the other way"""
        if amount == 0 or payer == payee:
            return
        self.balances[payer] = self.balances.get(payer, 0) - amount
        self.balances[payee] = self.balances.get(payee, 0) + amount

    def commit(self) -> WorldState:
        return WorldState(
            self.contracts, self.nonces, self.balances, self.requests, self.next_request_id
        )
