"""
Tests for block production, validation, replay and the ledger file
"""

import random
from dataclasses import replace

import pytest

from gridchain.contracts.models import EnergyReading
from gridchain.contracts.payloads import MeterInit
from gridchain.contracts.world import EMPTY_WORLD
from gridchain.errors import DecodeError, FramingError, ReplayError, ScheduleError
from gridchain.harness.verify import verify_ledger
from gridchain.ledger.consensus import RejectReason, assemble_block, propose_block, validate_block
from gridchain.ledger.genesis import Genesis, build_genesis_block, check_genesis_block
from gridchain.ledger.primitives import TxKind, decode_block, sign_block
from gridchain.ledger.replay import replay_blocks, replay_chain
from gridchain.ledger.storage import (
    FRAME_HEADER,
    append_block,
    load_ledger,
    read_ledger,
    write_ledger,
)

pytestmark = pytest.mark.unit

METER = MeterInit(device_type="smart-meter", measurement_type="energy")


def _validator_key(builder, height):
    address = builder.genesis.validator_set.scheduled(height)
    return next(k for k in builder.keys.validators if k.address == address)


class TestAssemble:
    def test_empty_block_keeps_parent_root(self, builder):
        block = builder.add_block([])
        assert block.transactions == ()
        assert block.state_root == EMPTY_WORLD.root

    def test_one_reading_updates_the_root(self, metered_chain):
        block = metered_chain.blocks[2]
        parent_world = metered_chain.worlds[1]
        verdict = validate_block(metered_chain.blocks[1], block, metered_chain.genesis, parent_world)
        assert verdict.accepted
        assert verdict.world.root == block.state_root != parent_world.root

    def test_stale_nonce_is_left_out(self, builder):
        keys = builder.keys
        deploy, meter = builder.deploy(keys.alice, METER)
        builder.add_block([deploy])
        reading = builder.tx(
            keys.alice, meter, TxKind.METER_UPDATE, EnergyReading(slot=0, energy_wh=5, device=meter)
        )
        block = builder.add_block([deploy, reading])
        assert block.transactions == (reading,)

    def test_nonce_gap_is_left_out(self, builder):
        keys = builder.keys
        deploy, meter = builder.deploy(keys.alice, METER)
        builder.add_block([deploy])
        builder.nonces[keys.alice.address] += 1
        skipped = builder.tx(
            keys.alice, meter, TxKind.METER_UPDATE, EnergyReading(slot=0, energy_wh=5, device=meter)
        )
        assert builder.add_block([skipped]).transactions == ()

    def test_wrong_proposer_cannot_assemble(self, builder):
        wrong = _validator_key(builder, 2)
        with pytest.raises(ScheduleError):
            assemble_block(builder.tip, builder.world, [], wrong, 1, builder.genesis)

    def test_tick_must_advance(self, builder):
        builder.add_block([], tick=5)
        key = _validator_key(builder, 2)
        with pytest.raises(ScheduleError):
            assemble_block(builder.tip, builder.world, [], key, 5, builder.genesis)


class TestValidate:
    def test_proposed_block_is_accepted(self, builder):
        key = _validator_key(builder, 1)
        block = propose_block(builder.tip, builder.world, [], key, 1, builder.genesis)
        assert validate_block(builder.tip, block, builder.genesis, builder.world).accepted

    def test_block_signed_by_next_validator_is_rejected(self, builder):
        key = _validator_key(builder, 1)
        block = propose_block(builder.tip, builder.world, [], key, 1, builder.genesis)
        other = _validator_key(builder, 2)
        forged = sign_block(replace(block, authority=other.address), other)
        verdict = validate_block(builder.tip, forged, builder.genesis, builder.world)
        assert verdict.reason is RejectReason.WRONG_AUTHORITY

    @pytest.mark.parametrize(
        "change, reason",
        [
            ({"prev_hash": bytes(32)}, RejectReason.BAD_PREV_HASH),
            ({"height": 2}, RejectReason.BAD_HEIGHT),
            ({"tick": 0}, RejectReason.BAD_TICK),
            ({"state_root": bytes(32)}, RejectReason.BAD_STATE_ROOT),
        ],
    )
    def test_header_faults(self, builder, change, reason):
        key = _validator_key(builder, 1)
        block = propose_block(builder.tip, builder.world, [], key, 1, builder.genesis)
        tampered = sign_block(replace(block, **change), key)
        verdict = validate_block(builder.tip, tampered, builder.genesis, builder.world)
        assert not verdict.accepted
        assert verdict.reason is reason

    def test_unsigned_change_is_a_bad_signature(self, builder):
        key = _validator_key(builder, 1)
        block = propose_block(builder.tip, builder.world, [], key, 1, builder.genesis)
        tampered = replace(block, state_root=bytes(32))
        verdict = validate_block(builder.tip, tampered, builder.genesis, builder.world)
        assert verdict.reason is RejectReason.BAD_SIGNATURE

    def test_out_of_order_transactions_are_bad(self, metered_chain):
        block = metered_chain.blocks[2]
        key = _validator_key(metered_chain, block.height)
        swapped = sign_block(replace(block, transactions=block.transactions[::-1]), key)
        verdict = validate_block(
            metered_chain.blocks[1], swapped, metered_chain.genesis, metered_chain.worlds[1]
        )
        assert verdict.reason is RejectReason.BAD_TX

    def test_random_byte_flips_in_transactions_are_always_rejected(self, metered_chain):
        rng = random.Random(7)
        parent, block = metered_chain.blocks[2], metered_chain.blocks[3]
        world = metered_chain.worlds[2]
        encoded = block.encode()
        # Transactions sit between the fixed header (8+32+8+20+32+4) and the signature
        start, end = 104, len(encoded) - 64
        for _ in range(100):
            data = bytearray(encoded)
            data[rng.randrange(start, end)] ^= 1 << rng.randrange(8)
            try:
                mutated = decode_block(bytes(data))
            except (DecodeError, ValueError):
                continue
            assert not validate_block(parent, mutated, metered_chain.genesis, world).accepted


class TestGenesisAndReplay:
    def test_genesis_block_shape(self, keys, genesis):
        block = build_genesis_block(genesis, keys.validators[0])
        assert block.height == 0 and block.tick == 0 and block.transactions == ()
        assert check_genesis_block(block, genesis) is None

    def test_genesis_signed_by_wrong_validator(self, keys, genesis):
        block = build_genesis_block(genesis, keys.validators[0])
        forged = sign_block(replace(block, authority=keys.validators[1].address), keys.validators[1])
        assert check_genesis_block(forged, genesis) == "wrong-authority"

    def test_genesis_round_trips_through_json(self, genesis, tmp_path):
        path = tmp_path / "genesis.json"
        genesis.save(path)
        assert Genesis.load(path).model_dump() == genesis.model_dump()

    def test_genesis_only_replays_to_the_empty_world(self, builder):
        assert replay_chain(builder.blocks, builder.genesis).root == EMPTY_WORLD.root

    def test_replay_reaches_the_recorded_root(self, metered_chain):
        world = replay_chain(metered_chain.blocks, metered_chain.genesis)
        assert world.root == metered_chain.tip.state_root

    def test_replay_reports_the_first_bad_height(self, metered_chain):
        blocks = list(metered_chain.blocks)
        blocks[3] = replace(blocks[3], state_root=bytes(32))
        with pytest.raises(ReplayError) as caught:
            list(replay_blocks(blocks, metered_chain.genesis))
        assert caught.value.height == 3
        assert caught.value.reason == "bad-signature"

    def test_empty_block_list(self, genesis):
        with pytest.raises(ReplayError) as caught:
            replay_chain([], genesis)
        assert caught.value.reason == "missing-genesis"


class TestLedgerFile:
    @pytest.fixture
    def ledger(self, metered_chain, tmp_path):
        path = tmp_path / "ledger.bin"
        write_ledger(path, metered_chain.blocks)
        genesis_path = tmp_path / "genesis.json"
        metered_chain.genesis.save(genesis_path)
        return path, genesis_path

    def test_write_then_load(self, ledger, metered_chain):
        assert load_ledger(ledger[0]) == metered_chain.blocks

    def test_append_extends_the_file(self, metered_chain, tmp_path):
        path = tmp_path / "ledger.bin"
        write_ledger(path, metered_chain.blocks[:2])
        for block in metered_chain.blocks[2:]:
            append_block(path, block)
        assert load_ledger(path) == metered_chain.blocks

    def test_untampered_ledger_verifies(self, ledger, metered_chain):
        report = verify_ledger(*ledger)
        assert report.ok
        assert report.blocks_verified == len(metered_chain.blocks)
        assert report.state_root == metered_chain.tip.state_root.hex()

    def test_flipped_byte_in_block_3_fails_at_height_3(self, ledger, metered_chain):
        path, genesis_path = ledger
        data = bytearray(path.read_bytes())
        offset = sum(FRAME_HEADER.size + len(b.encode()) for b in metered_chain.blocks[:3])
        size = FRAME_HEADER.size + len(metered_chain.blocks[3].encode())
        rng = random.Random(3)
        for _ in range(100):
            position = offset + rng.randrange(size)
            mutated = bytearray(data)
            mutated[position] ^= 1 << rng.randrange(8)
            path.write_bytes(bytes(mutated))
            report = verify_ledger(path, genesis_path)
            assert not report.ok
            assert report.failure_height == 3, (position, report.reason)
            assert report.blocks_verified == 3

    def test_truncated_last_frame(self, ledger, metered_chain):
        path, genesis_path = ledger
        path.write_bytes(path.read_bytes()[:-10])
        contents = read_ledger(path)
        assert isinstance(contents.error, FramingError)
        assert len(contents.blocks) == len(metered_chain.blocks) - 1

        report = verify_ledger(path, genesis_path)
        assert not report.ok
        assert report.reason.startswith("framing")
        assert report.blocks_verified == len(metered_chain.blocks) - 1
        assert report.failure_height == len(metered_chain.blocks) - 1

    def test_load_ledger_raises_on_bad_framing(self, ledger):
        path, _ = ledger
        path.write_bytes(path.read_bytes() + b"\x00\x01")
        with pytest.raises(FramingError):
            load_ledger(path)
