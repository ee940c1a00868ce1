"""
Genesis
Validator set, oracle address and the account registry fixed at chain start
"""

from functools import cached_property
from pathlib import Path

import orjson
from pydantic import BaseModel, ConfigDict, Field

from gridchain.contracts.world import EMPTY_WORLD, ExecutionContext
from gridchain.ledger.crypto import ZERO_HASH, Address, KeyPair
from gridchain.ledger.primitives import Block, ValidatorSet, sign_block, verify_block_signature


class AccountEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    address: Address
    public_key: str = Field(pattern="^[0-9a-f]{64}$")
    role: str
    label: str


class Genesis(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    chain_id: str = "gridchain-sim"
    slots_per_day: int = Field(default=24, gt=0)
    validators: tuple[Address, ...]
    oracle: Address
    accounts: tuple[AccountEntry, ...]

    @cached_property
    def validator_set(self) -> ValidatorSet:
        return ValidatorSet(self.validators)

    @cached_property
    def key_registry(self) -> dict[Address, bytes]:
        return {a.address: bytes.fromhex(a.public_key) for a in self.accounts}

    def accounts_with_role(self, role: str) -> list[AccountEntry]:
        return [a for a in self.accounts if a.role == role]

    def context(self, height: int, tick: int) -> ExecutionContext:
        return ExecutionContext(
            tick=tick,
            height=height,
            oracle=self.oracle,
            slots_per_day=self.slots_per_day,
        )

    def save(self, path: Path) -> None:
        path.write_bytes(
            orjson.dumps(
                self.model_dump(mode="json"),
                option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS,
            )
        )

    @classmethod
    def load(cls, path: Path) -> "Genesis":
        return cls.model_validate(orjson.loads(Path(path).read_bytes()))


def account_entry(key: KeyPair, role: str, label: str) -> AccountEntry:
    return AccountEntry(address=key.address, public_key=key.public.hex(), role=role, label=label)


def build_genesis_block(genesis: Genesis, authority: KeyPair) -> Block:
    """Height-0 block with the empty world root, signed by validator 0"""
    unsigned = Block(
        height=0,
        prev_hash=ZERO_HASH,
        tick=0,
        authority=genesis.validator_set.scheduled(0),
        transactions=(),
        state_root=EMPTY_WORLD.root,
    )
    return sign_block(unsigned, authority)


def check_genesis_block(block: Block, genesis: Genesis) -> str | None:
    """Why ``block`` is not this chain's genesis block, or None"""
    if block.height != 0 or block.prev_hash != ZERO_HASH or block.tick != 0:
        return "bad-genesis"
    if block.authority != genesis.validator_set.scheduled(0):
        return "wrong-authority"
    if block.transactions:
        return "bad-genesis"
    if block.state_root != EMPTY_WORLD.root:
        return "bad-state-root"
    if not verify_block_signature(block, genesis.key_registry):
        return "bad-signature"
    return None
