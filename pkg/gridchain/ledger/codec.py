"""
Canonical Byte Encoding
Fixed-order, big-endian binary framing plus sorted-key JSON bodies
"""

import struct
from typing import Any

import orjson

from gridchain.errors import DecodeError


def canonical_json(value: Any) -> bytes:
    """Sorted-key compact JSON; callers pass JSON-mode dumps (ints, strs, lists)"""
    return orjson.dumps(value, option=orjson.OPT_SORT_KEYS)


class ByteWriter:
    """Accumulates canonical fields in order"""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def u8(self, value: int) -> "ByteWriter":
        self._parts.append(struct.pack(">B", value))
        return self

    def u32(self, value: int) -> "ByteWriter":
        self._parts.append(struct.pack(">I", value))
        return self

    def u64(self, value: int) -> "ByteWriter":
        self._parts.append(struct.pack(">Q", value))
        return self

    def i64(self, value: int) -> "ByteWriter":
        self._parts.append(struct.pack(">q", value))
        return self

    def raw(self, data: bytes) -> "ByteWriter":
        self._parts.append(data)
        return self

    def blob(self, data: bytes) -> "ByteWriter":
        """Length-prefixed variable field"""
        self.u32(len(data))
        self._parts.append(data)
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class ByteReader:
    """Strict reader: every read must be fully satisfied"""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def _take(self, size: int) -> bytes:
        end = self._pos + size
        if end > len(self._data):
            raise DecodeError(
                f"need {size} bytes at offset {self._pos}, "
                f"only {len(self._data) - self._pos} left"
            )
        chunk = self._data[self._pos : end]
        self._pos = end
        return chunk

    def u8(self) -> int:
        return int(struct.unpack(">B", self._take(1))[0])

    def u32(self) -> int:
        return int(struct.unpack(">I", self._take(4))[0])

    def u64(self) -> int:
        return int(struct.unpack(">Q", self._take(8))[0])

    def raw(self, size: int) -> bytes:
        return self._take(size)

    def blob(self) -> bytes:
        return self._take(self.u32())

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes")
