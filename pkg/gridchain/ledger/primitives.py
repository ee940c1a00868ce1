"""
Ledger Primitives
Transactions, blocks and the validator schedule with their canonical
encodings and signatures
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from enum import IntEnum
from functools import cached_property

from pydantic import BaseModel

from gridchain.errors import DecodeError, KeyMismatchError
from gridchain.ledger.codec import ByteReader, ByteWriter, canonical_json
from gridchain.ledger.crypto import (
    ADDRESS_SIZE,
    HASH_SIZE,
    SIGNATURE_SIZE,
    Address,
    KeyPair,
    sha256,
    verify_signature,
)


class TxKind(IntEnum):
    DEPLOY = 0
    METER_UPDATE = 1
    DR_ISSUE_ORDER = 2
    DR_SETTLE = 3
    MARKET_SUBMIT_ORDER = 4
    MARKET_RECORD_CLEARING = 5
    VPP_REGISTER_ASSET = 6
    VPP_RECORD_DISPATCH = 7
    VPP_SETTLE = 8
    ORACLE_REQUEST = 9
    ORACLE_RESPONSE = 10


@dataclass(frozen=True)
class Transaction:
    sender: Address
    receiver: Address
    nonce: int
    kind: TxKind
    payload: bytes
    signature: bytes = b""

    def unsigned_bytes(self) -> bytes:
        return (
            ByteWriter()
            .raw(self.sender.value)
            .raw(self.receiver.value)
            .u64(self.nonce)
            .u8(int(self.kind))
            .blob(self.payload)
            .getvalue()
        )

    def encode(self) -> bytes:
        if len(self.signature) != SIGNATURE_SIZE:
            raise ValueError("transaction is not signed")
        return self.unsigned_bytes() + self.signature

    @cached_property
    def hash(self) -> bytes:
        return sha256(self.encode())


def decode_transaction(data: bytes) -> Transaction:
    reader = ByteReader(data)
    tx = _read_transaction(reader)
    reader.expect_end()
    return tx


def _read_transaction(reader: ByteReader) -> Transaction:
    sender = Address(reader.raw(ADDRESS_SIZE))
    receiver = Address(reader.raw(ADDRESS_SIZE))
    nonce = reader.u64()
    tag = reader.u8()
    try:
        kind = TxKind(tag)
    except ValueError as e:
        raise DecodeError(f"unknown transaction kind {tag}") from e
    payload = reader.blob()
    signature = reader.raw(SIGNATURE_SIZE)
    return Transaction(sender, receiver, nonce, kind, payload, signature)


def sign_transaction(tx: Transaction, key: KeyPair) -> Transaction:
    if key.address != tx.sender:
        raise KeyMismatchError(
            f"key for {key.address} cannot sign for sender {tx.sender}"
        )
    return replace(tx, signature=key.sign(tx.unsigned_bytes()))


def verify_transaction(tx: Transaction, key_registry: Mapping[Address, bytes]) -> bool:
    """True iff the sender is registered and the signature covers the fields"""
    public = key_registry.get(tx.sender)
    if public is None:
        return False
    return verify_signature(public, tx.unsigned_bytes(), tx.signature)


def make_transaction(
    key: KeyPair,
    receiver: Address,
    nonce: int,
    kind: TxKind,
    body: BaseModel,
) -> Transaction:
    """Encode a typed body as the payload and sign"""
    payload = canonical_json(body.model_dump(mode="json"))
    unsigned = Transaction(key.address, receiver, nonce, kind, payload)
    return sign_transaction(unsigned, key)


@dataclass(frozen=True)
class ValidatorSet:
    validators: tuple[Address, ...]

    def __post_init__(self) -> None:
        if not self.validators:
            raise ValueError("validator set must not be empty")
        if len(set(self.validators)) != len(self.validators):
            raise ValueError("validator set contains duplicates")

    def scheduled(self, height: int) -> Address:
        return self.validators[height % len(self.validators)]

    def __len__(self) -> int:
        return len(self.validators)


def transactions_root(transactions: Sequence[Transaction]) -> bytes:
    writer = ByteWriter()
    for tx in transactions:
        writer.blob(tx.encode())
    return sha256(writer.getvalue())


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    tick: int
    authority: Address
    transactions: tuple[Transaction, ...]
    state_root: bytes
    signature: bytes = b""

    def header_bytes(self) -> bytes:
        return (
            ByteWriter()
            .u64(self.height)
            .raw(self.prev_hash)
            .u64(self.tick)
            .raw(self.authority.value)
            .raw(transactions_root(self.transactions))
            .raw(self.state_root)
            .getvalue()
        )

    def encode(self) -> bytes:
        if len(self.signature) != SIGNATURE_SIZE:
            raise ValueError("block is not signed")
        writer = (
            ByteWriter()
            .u64(self.height)
            .raw(self.prev_hash)
            .u64(self.tick)
            .raw(self.authority.value)
            .raw(self.state_root)
            .u32(len(self.transactions))
        )
        for tx in self.transactions:
            writer.blob(tx.encode())
        return writer.raw(self.signature).getvalue()

    @cached_property
    def hash(self) -> bytes:
        return sha256(self.header_bytes() + self.signature)


def decode_block(data: bytes) -> Block:
    reader = ByteReader(data)
    height = reader.u64()
    prev_hash = reader.raw(HASH_SIZE)
    tick = reader.u64()
    authority = Address(reader.raw(ADDRESS_SIZE))
    state_root = reader.raw(HASH_SIZE)
    transactions = tuple(
        decode_transaction(reader.blob()) for _ in range(reader.u32())
    )
    signature = reader.raw(SIGNATURE_SIZE)
    reader.expect_end()
    return Block(height, prev_hash, tick, authority, transactions, state_root, signature)


def sign_block(block: Block, key: KeyPair) -> Block:
    if key.address != block.authority:
        raise KeyMismatchError(f"key for {key.address} cannot sign as {block.authority}")
    return replace(block, signature=key.sign(block.header_bytes()))


def verify_block_signature(block: Block, key_registry: Mapping[Address, bytes]) -> bool:
    public = key_registry.get(block.authority)
    if public is None:
        return False
    return verify_signature(public, block.header_bytes(), block.signature)


def canonical_encode(entity: Transaction | Block) -> bytes:
    """Bytes covered by the entity's signature"""
    if isinstance(entity, Transaction):
        return entity.unsigned_bytes()
    return entity.header_bytes()
