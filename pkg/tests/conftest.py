"""
Shared fixtures: deterministic keys, a four-validator genesis and a helper
that grows a chain block by block through the real consensus path
"""

from collections.abc import Sequence
from pathlib import Path
from types import MappingProxyType

import pytest

from gridchain.contracts.models import EnergyReading
from gridchain.contracts.payloads import MeterInit
from gridchain.contracts.vm import exec_transaction
from gridchain.contracts.world import EMPTY_WORLD, Receipt, WorldState
from gridchain.ledger.consensus import assemble_block
from gridchain.ledger.crypto import (
    NULL_ADDRESS,
    Address,
    KeyPair,
    contract_address,
    create_account,
    seed_from_label,
)
from gridchain.ledger.genesis import Genesis, account_entry, build_genesis_block
from gridchain.ledger.node import ChainView
from gridchain.ledger.primitives import Block, Transaction, TxKind, make_transaction

DATA_DIR = Path(__file__).resolve().parent.parent / "gridchain" / "data"


def key_for(label: str, seed: int = 0) -> KeyPair:
    return create_account(seed_from_label(label, seed))[0]


class TestKeys:
    """Every account the unit tests sign with"""

    __test__ = False

    def __init__(self) -> None:
        self.validators = [key_for(f"validator:{i}") for i in range(4)]
        self.oracle = key_for("oracle")
        self.aggregator = key_for("aggregator")
        self.operator = key_for("market-operator")
        self.alice = key_for("prosumer:alice")
        self.bob = key_for("prosumer:bob")
        self.outsider = key_for("outsider")

    def genesis(self, slots_per_day: int = 24, validators: int = 4) -> Genesis:
        accounts = [
            account_entry(k, "validator", f"validator-{i}")
            for i, k in enumerate(self.validators[:validators])
        ]
        accounts += [
            account_entry(self.oracle, "oracle", "oracle"),
            account_entry(self.aggregator, "aggregator", "aggregator"),
            account_entry(self.operator, "operator", "market-operator"),
            account_entry(self.alice, "prosumer", "alice"),
            account_entry(self.bob, "prosumer", "bob"),
        ]
        return Genesis(
            chain_id="gridchain-test",
            slots_per_day=slots_per_day,
            validators=tuple(k.address for k in self.validators[:validators]),
            oracle=self.oracle.address,
            accounts=tuple(accounts),
        )


class ChainBuilder:
    """Appends blocks signed by the scheduled validator, one tick apart"""

    def __init__(self, keys: TestKeys, genesis: Genesis) -> None:
        self.keys = keys
        self.genesis = genesis
        self._by_address = {k.address: k for k in keys.validators}
        self.blocks: list[Block] = [build_genesis_block(genesis, keys.validators[0])]
        self.worlds: list[WorldState] = [EMPTY_WORLD]
        self.receipts: list[tuple[Receipt, ...]] = [()]
        self.nonces: dict[Address, int] = {}
        # Set by the metered_chain fixture
        self.alice_meter = NULL_ADDRESS
        self.bob_meter = NULL_ADDRESS

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    @property
    def world(self) -> WorldState:
        return self.worlds[-1]

    def tx(self, key: KeyPair, receiver: Address, kind: TxKind, body) -> Transaction:
        nonce = self.nonces.get(key.address, 0)
        self.nonces[key.address] = nonce + 1
        return make_transaction(key, receiver, nonce, kind, body)

    def deploy(self, key: KeyPair, body) -> tuple[Transaction, Address]:
        nonce = self.nonces.get(key.address, 0)
        return self.tx(key, NULL_ADDRESS, TxKind.DEPLOY, body), contract_address(key.address, nonce)

    def add_block(self, transactions: Sequence[Transaction] = (), tick: int | None = None) -> Block:
        height = self.tip.height + 1
        authority = self._by_address[self.genesis.validator_set.scheduled(height)]
        block, world, receipts = assemble_block(
            self.tip,
            self.world,
            transactions,
            authority,
            self.tip.tick + 1 if tick is None else tick,
            self.genesis,
        )
        self.blocks.append(block)
        self.worlds.append(world)
        self.receipts.append(receipts)
        return block

    def view(self) -> ChainView:
        readings: dict[Address, dict[int, int]] = {}
        for block, receipts in zip(self.blocks, self.receipts):
            for tx, receipt in zip(block.transactions, receipts):
                if receipt.ok and tx.kind is TxKind.METER_UPDATE:
                    reading = EnergyReading.model_validate_json(tx.payload)
                    readings.setdefault(reading.device, {})[reading.slot] = reading.energy_wh
        frozen = {d: MappingProxyType(s) for d, s in readings.items()}
        return ChainView(self.genesis, self.tip, self.world, MappingProxyType(frozen))


@pytest.fixture(scope="session")
def keys() -> TestKeys:
    return TestKeys()


@pytest.fixture(scope="session")
def genesis(keys: TestKeys) -> Genesis:
    return keys.genesis()


@pytest.fixture
def builder(keys: TestKeys, genesis: Genesis) -> ChainBuilder:
    return ChainBuilder(keys, genesis)


@pytest.fixture
def metered_chain(builder: ChainBuilder) -> ChainBuilder:
    """Six blocks: alice and bob deploy meters, then report one reading per block"""
    alice_deploy, alice_meter = builder.deploy(
        builder.keys.alice, MeterInit(device_type="smart-meter", measurement_type="energy")
    )
    bob_deploy, bob_meter = builder.deploy(
        builder.keys.bob, MeterInit(device_type="smart-meter", measurement_type="energy")
    )
    builder.add_block([alice_deploy, bob_deploy])
    for slot in range(5):
        builder.add_block(
            [
                builder.tx(
                    builder.keys.alice,
                    alice_meter,
                    TxKind.METER_UPDATE,
                    EnergyReading(slot=slot, energy_wh=1000 + 10 * slot, device=alice_meter),
                ),
                builder.tx(
                    builder.keys.bob,
                    bob_meter,
                    TxKind.METER_UPDATE,
                    EnergyReading(slot=slot, energy_wh=-200 - slot, device=bob_meter),
                ),
            ]
        )
    builder.alice_meter = alice_meter
    builder.bob_meter = bob_meter
    return builder


class ContractHarness:
    """Executes single transactions against a world, without blocks"""

    def __init__(self, genesis: Genesis) -> None:
        self.genesis = genesis
        self.world: WorldState = EMPTY_WORLD

    def send(self, key: KeyPair, receiver: Address, kind: TxKind, body, tick: int = 1) -> Receipt:
        tx = make_transaction(key, receiver, self.world.nonce_of(key.address), kind, body)
        return self.send_raw(tx, tick)

    def send_raw(self, tx: Transaction, tick: int = 1) -> Receipt:
        self.world, receipt = exec_transaction(self.world, tx, self.genesis.context(tick, tick))
        return receipt

    def deploy(self, key: KeyPair, init, tick: int = 0) -> Address:
        receipt = self.send(key, NULL_ADDRESS, TxKind.DEPLOY, init, tick)
        assert receipt.ok, receipt.error
        assert receipt.created is not None
        return receipt.created


@pytest.fixture
def vm(genesis: Genesis) -> ContractHarness:
    return ContractHarness(genesis)
