"""
Meter contract: one per IoT metering device. Metadata is fixed at deploy;
every accepted reading extends a rolling hash.
"""

from gridchain.contracts.models import EnergyReading, MeterContractState, MeterMetadata
from gridchain.contracts.payloads import MeterInit
from gridchain.errors import ContractError
from gridchain.ledger.codec import ByteWriter
from gridchain.ledger.crypto import Address, sha256

MAX_READING_WH = 10**9


def reading_bytes(reading: EnergyReading) -> bytes:
    return (
        ByteWriter()
        .u64(reading.slot)
        .i64(reading.energy_wh)
        .raw(reading.device.value)
        .getvalue()
    )


def fold_reading(root: bytes, reading: EnergyReading) -> bytes:
    return sha256(root + reading_bytes(reading))


def deploy_meter(init: MeterInit, owner: Address) -> MeterContractState:
    return MeterContractState(
        metadata=MeterMetadata(
            device_type=init.device_type,
            measurement_type=init.measurement_type,
            owner=owner,
        )
    )


def meter_update(
    state: MeterContractState,
    reading: EnergyReading,
    sender: Address,
    contract: Address,
) -> MeterContractState:
    if sender != state.metadata.owner:
        raise ContractError("only the meter owner may submit readings")
    if reading.device != contract:
        raise ContractError("reading device does not match the meter contract")
    if abs(reading.energy_wh) > MAX_READING_WH:
        raise ContractError(f"reading {reading.energy_wh} Wh out of bounds")
    # Slots strictly increase, so each (device, slot) is accepted at most once
    if state.latest is not None and reading.slot <= state.latest.slot:
        raise ContractError(f"duplicate or out-of-order slot {reading.slot}")

    root = fold_reading(bytes.fromhex(state.readings_root), reading)
    return state.model_copy(
        update={"latest": reading, "readings_root": root.hex(), "count": state.count + 1}
    )
