"""
Ledger File
Append-only sequence of blocks, each framed by a 4-byte big-endian length
"""

import logging
import struct
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from gridchain.errors import DecodeError, FramingError
from gridchain.ledger.primitives import Block, decode_block

logger = logging.getLogger(__name__)

FRAME_HEADER = struct.Struct(">I")


def frame(block: Block) -> bytes:
    data = block.encode()
    return FRAME_HEADER.pack(len(data)) + data


def write_ledger(path: Path, blocks: Iterable[Block]) -> int:
    """Write a fresh ledger file; returns the number of blocks written"""
    count = 0
    with open(path, "wb") as handle:
        for block in blocks:
            handle.write(frame(block))
            count += 1
    logger.info(f"Wrote {count} blocks to {path}")
    return count


def append_block(path: Path, block: Block) -> None:
    with open(path, "ab") as handle:
        handle.write(frame(block))


@dataclass(frozen=True)
class LedgerContents:
    blocks: list[Block]
    # Set when reading stopped early; blocks holds everything before it
    error: DecodeError | None = None


def read_ledger(path: Path) -> LedgerContents:
    data = Path(path).read_bytes()
    blocks: list[Block] = []
    offset = 0
    while offset < len(data):
        index = len(blocks)
        if offset + FRAME_HEADER.size > len(data):
            return LedgerContents(blocks, FramingError("truncated frame header", index))
        (size,) = FRAME_HEADER.unpack_from(data, offset)
        start = offset + FRAME_HEADER.size
        if start + size > len(data):
            return LedgerContents(
                blocks,
                FramingError(f"frame {index} needs {size} bytes, {len(data) - start} left", index),
            )
        try:
            blocks.append(decode_block(data[start : start + size]))
        except (DecodeError, ValueError) as e:
            return LedgerContents(blocks, FramingError(f"block {index} undecodable: {e}", index))
        offset = start + size
    return LedgerContents(blocks)


def load_ledger(path: Path) -> list[Block]:
    """Read a ledger that must be well-framed"""
    contents = read_ledger(path)
    if contents.error is not None:
        raise contents.error
    return contents.blocks
