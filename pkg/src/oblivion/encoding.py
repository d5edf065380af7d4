"""Length-prefixed binary encoding shared by key files, credentials, and wire messages.

Every field is a 4-byte big-endian length followed by that many payload bytes.
Integers are minimal-length unsigned big-endian (zero encodes as a single
0x00 byte).  Because every field is length-delimited and each structure has a
fixed field list, a valid encoding is never a prefix of another valid
encoding, and decoding is strict: truncated or trailing bytes raise.
"""

from __future__ import annotations

_LEN_BYTES = 4
_MAX_FIELD = 1 << 31


class WireFormatError(ValueError):
    """Raised when a byte string does not parse as the expected structure."""


def int_to_bytes(value: int) -> bytes:
    """Minimal unsigned big-endian representation; 0 -> b'\\x00'."""
    if value < 0:
        raise WireFormatError("negative integers are not encodable")
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def pack_bytes(data: bytes) -> bytes:
    if len(data) >= _MAX_FIELD:
        raise WireFormatError("field too large")
    return len(data).to_bytes(_LEN_BYTES, "big") + data


def pack_int(value: int) -> bytes:
    return pack_bytes(int_to_bytes(value))


def pack_str(text: str) -> bytes:
    return pack_bytes(text.encode("utf-8"))


class Reader:
    """Strict sequential reader over an encoded byte string."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos

    def raw(self, n: int) -> bytes:
        if n < 0 or self.remaining < n:
            raise WireFormatError(f"truncated input: wanted {n} bytes, have {self.remaining}")
        chunk = self._data[self._pos:self._pos + n]
        self._pos += n
        return chunk

    def u8(self) -> int:
        return self.raw(1)[0]

    def bytes_field(self) -> bytes:
        length = int.from_bytes(self.raw(_LEN_BYTES), "big")
        return self.raw(length)

    def int_field(self) -> int:
        return int.from_bytes(self.bytes_field(), "big")

    def str_field(self) -> str:
        try:
            return self.bytes_field().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WireFormatError("field is not valid UTF-8") from exc

    def expect(self, prefix: bytes, what: str) -> None:
        if self.raw(len(prefix)) != prefix:
            raise WireFormatError(f"bad {what}")

    def finish(self) -> None:
        if self.remaining:
            raise WireFormatError(f"{self.remaining} trailing bytes after structure")
