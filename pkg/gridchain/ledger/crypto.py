"""
Keys, Addresses and Hashing
Ed25519 account keys derived from 32-byte seeds; addresses are the low
20 bytes of the SHA-256 of the public key
"""

import hashlib
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from pydantic import GetCoreSchemaHandler, GetJsonSchemaHandler
from pydantic.json_schema import JsonSchemaValue
from pydantic_core import core_schema

from gridchain.errors import InvalidSeedError

ADDRESS_SIZE = 20
HASH_SIZE = 32
SEED_SIZE = 32
PUBLIC_KEY_SIZE = 32
SIGNATURE_SIZE = 64
ZERO_HASH = bytes(HASH_SIZE)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True, order=True)
class Address:
    """20-byte account or contract identifier"""

    value: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.value, bytes) or len(self.value) != ADDRESS_SIZE:
            raise ValueError(f"address must be {ADDRESS_SIZE} bytes")

    @classmethod
    def from_hex(cls, text: str) -> "Address":
        raw = text[2:] if text.startswith(("0x", "0X")) else text
        try:
            return cls(bytes.fromhex(raw))
        except ValueError as e:
            raise ValueError(f"invalid address {text!r}: {e}") from e

    @classmethod
    def from_public_key(cls, public: bytes) -> "Address":
        return cls(sha256(public)[-ADDRESS_SIZE:])

    def hex(self) -> str:
        return "0x" + self.value.hex()

    def short(self) -> str:
        return self.value.hex()[:8]

    def __str__(self) -> str:
        return self.hex()

    def __repr__(self) -> str:
        return f"Address({self.hex()})"

    @classmethod
    def _coerce(cls, value: Any) -> "Address":
        if isinstance(value, Address):
            return value
        if isinstance(value, str):
            return cls.from_hex(value)
        if isinstance(value, bytes):
            return cls(value)
        raise ValueError(f"cannot read an address from {type(value).__name__}")

    @classmethod
    def __get_pydantic_core_schema__(
        cls, source: Any, handler: GetCoreSchemaHandler
    ) -> core_schema.CoreSchema:
        return core_schema.no_info_plain_validator_function(
            cls._coerce,
            serialization=core_schema.plain_serializer_function_ser_schema(
                str, when_used="json"
            ),
        )

    @classmethod
    def __get_pydantic_json_schema__(
        cls, schema: core_schema.CoreSchema, handler: GetJsonSchemaHandler
    ) -> JsonSchemaValue:
        return {"type": "string", "pattern": "^0x[0-9a-f]{40}$"}


NULL_ADDRESS = Address(bytes(ADDRESS_SIZE))


@dataclass(frozen=True)
class KeyPair:
    """Ed25519 signing key (32-byte seed) and its public key"""

    secret: bytes = field(repr=False)
    public: bytes

    @property
    def address(self) -> Address:
        return Address.from_public_key(self.public)

    def sign(self, message: bytes) -> bytes:
        return _private_key(self.secret).sign(message)


@lru_cache(maxsize=4096)
def _private_key(secret: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(secret)


@lru_cache(maxsize=4096)
def _public_key(public: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(public)


def create_account(seed: bytes) -> tuple[KeyPair, Address]:
    """Derive the key pair and address for a 32-byte seed"""
    if not isinstance(seed, bytes) or len(seed) != SEED_SIZE:
        size = len(seed) if isinstance(seed, (bytes, bytearray)) else "non-bytes"
        raise InvalidSeedError(f"seed must be exactly {SEED_SIZE} bytes, got {size}")
    public = (
        _private_key(seed)
        .public_key()
        .public_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PublicFormat.Raw,
        )
    )
    keypair = KeyPair(secret=seed, public=public)
    return keypair, keypair.address


def seed_from_label(label: str, run_seed: int = 0) -> bytes:
    """Stretch a human label and the run seed into a 32-byte account seed"""
    return sha256(label.encode("utf-8") + b"|" + struct.pack(">Q", run_seed))


def verify_signature(public: bytes, message: bytes, signature: bytes) -> bool:
    if len(public) != PUBLIC_KEY_SIZE or len(signature) != SIGNATURE_SIZE:
        return False
    try:
        _public_key(public).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def contract_address(sender: Address, nonce: int) -> Address:
    """Address of the contract deployed by ``sender`` at ``nonce``"""
    return Address(sha256(sender.value + struct.pack(">Q", nonce))[-ADDRESS_SIZE:])
