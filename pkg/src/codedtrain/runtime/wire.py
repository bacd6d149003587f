"""Framed messages for the master-worker protocol.

Frame layout: u32 little-endian payload length, u8 message type, payload.
Vectors travel as u64 length + little-endian f64 values; matrices use the
row-block fixture layout (u64 rows, u64 cols, f64 values); durations are
u64 nanoseconds. Every message round-trips through bytes bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..blocks import matrix_from_bytes, matrix_to_bytes
from ..coding import GeneratorMatrix, ProtocolError

__all__ = [
    "Operand",
    "Role",
    "Register",
    "SetGenerator",
    "BlockRequest",
    "BlockResponse",
    "EncodeComplete",
    "IterationStart",
    "PartialProduct",
    "Cancel",
    "Shutdown",
    "Message",
    "encode_message",
    "decode_frame_body",
    "read_message",
    "send_message",
    "recv_message",
    "ProtocolError",
]

_LEN = struct.Struct("<I")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
MAX_FRAME = 1 << 31


class Operand(IntEnum):
    X = 0
    XT = 1


class Role(IntEnum):
    SYSTEMATIC = 1
    REDUNDANT = 2


def _pack_vector(v: np.ndarray) -> bytes:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    return _U64.pack(arr.size) + arr.astype("<f8", copy=False).tobytes()


def _unpack_vector(buf: bytes, off: int) -> tuple[np.ndarray, int]:
    (size,) = _U64.unpack_from(buf, off)
    off += 8
    end = off + 8 * size
    if end > len(buf):
        raise ProtocolError("vector runs past end of payload")
    vec = np.frombuffer(buf[off:end], dtype="<f8").copy()
    return vec, end


@dataclass(frozen=True)
class Register:
    worker_id: int

    TYPE = 1

    def payload(self) -> bytes:
        return _U32.pack(self.worker_id)

    @classmethod
    def parse(cls, buf: bytes) -> "Register":
        (wid,) = _U32.unpack(buf)
        return cls(wid)


@dataclass(frozen=True, eq=False)
class SetGenerator:
    generator: GeneratorMatrix
    role: Role
    operands: tuple[Operand, ...]

    TYPE = 2

    def payload(self) -> bytes:
        mask = 0
        for op in self.operands:
            mask |= 1 << int(op)
        return bytes([int(self.role), mask]) + self.generator.to_bytes()

    @classmethod
    def parse(cls, buf: bytes) -> "SetGenerator":
        role = Role(buf[0])
        mask = buf[1]
        ops = tuple(op for op in Operand if mask & (1 << int(op)))
        return cls(GeneratorMatrix.from_bytes(buf[2:]), role, ops)


@dataclass(frozen=True)
class BlockRequest:
    operand: Operand
    block_id: int

    TYPE = 3

    def payload(self) -> bytes:
        return bytes([int(self.operand)]) + _U64.pack(self.block_id)

    @classmethod
    def parse(cls, buf: bytes) -> "BlockRequest":
        (bid,) = _U64.unpack(buf[1:9])
        return cls(Operand(buf[0]), bid)


@dataclass(frozen=True, eq=False)
class BlockResponse:
    operand: Operand
    block_id: int
    matrix: np.ndarray

    TYPE = 4

    def payload(self) -> bytes:
        return (
            bytes([int(self.operand)])
            + _U64.pack(self.block_id)
            + matrix_to_bytes(self.matrix)
        )

    @classmethod
    def parse(cls, buf: bytes) -> "BlockResponse":
        (bid,) = _U64.unpack(buf[1:9])
        return cls(Operand(buf[0]), bid, matrix_from_bytes(buf[9:]))


@dataclass(frozen=True)
class EncodeComplete:
    worker_id: int
    downloads_x: int
    downloads_xt: int
    encode_nanos: int

    TYPE = 5

    def payload(self) -> bytes:
        return _U32.pack(self.worker_id) + struct.pack(
            "<QQQ", self.downloads_x, self.downloads_xt, self.encode_nanos
        )

    @classmethod
    def parse(cls, buf: bytes) -> "EncodeComplete":
        (wid,) = _U32.unpack_from(buf, 0)
        dx, dxt, nanos = struct.unpack_from("<QQQ", buf, 4)
        return cls(wid, dx, dxt, nanos)


@dataclass(frozen=True, eq=False)
class IterationStart:
    iteration: int
    operand: Operand
    vector: np.ndarray

    TYPE = 6

    def payload(self) -> bytes:
        return (
            _U32.pack(self.iteration)
            + bytes([int(self.operand)])
            + _pack_vector(self.vector)
        )

    @classmethod
    def parse(cls, buf: bytes) -> "IterationStart":
        (it,) = _U32.unpack_from(buf, 0)
        vec, _ = _unpack_vector(buf, 5)
        return cls(it, Operand(buf[4]), vec)


@dataclass(frozen=True, eq=False)
class PartialProduct:
    worker_id: int
    iteration: int
    operand: Operand
    vector: np.ndarray

    TYPE = 7

    def payload(self) -> bytes:
        return (
            _U32.pack(self.worker_id)
            + _U32.pack(self.iteration)
            + bytes([int(self.operand)])
            + _pack_vector(self.vector)
        )

    @classmethod
    def parse(cls, buf: bytes) -> "PartialProduct":
        wid, it = struct.unpack_from("<II", buf, 0)
        vec, _ = _unpack_vector(buf, 9)
        return cls(wid, it, Operand(buf[8]), vec)


@dataclass(frozen=True)
class Cancel:
    iteration: int

    TYPE = 8

    def payload(self) -> bytes:
        return _U32.pack(self.iteration)

    @classmethod
    def parse(cls, buf: bytes) -> "Cancel":
        (it,) = _U32.unpack(buf)
        return cls(it)


@dataclass(frozen=True)
class Shutdown:
    TYPE = 9

    def payload(self) -> bytes:
        return b""

    @classmethod
    def parse(cls, buf: bytes) -> "Shutdown":
        return cls()


Message = (
    Register
    | SetGenerator
    | BlockRequest
    | BlockResponse
    | EncodeComplete
    | IterationStart
    | PartialProduct
    | Cancel
    | Shutdown
)

_BY_TYPE = {
    cls.TYPE: cls
    for cls in (
        Register,
        SetGenerator,
        BlockRequest,
        BlockResponse,
        EncodeComplete,
        IterationStart,
        PartialProduct,
        Cancel,
        Shutdown,
    )
}


def encode_message(msg: Message) -> bytes:
    payload = msg.payload()
    if len(payload) >= MAX_FRAME:
        raise ProtocolError(f"payload of {len(payload)} bytes exceeds frame limit")
    return _LEN.pack(len(payload)) + bytes([msg.TYPE]) + payload


def decode_frame_body(msg_type: int, payload: bytes) -> Message:
    cls = _BY_TYPE.get(msg_type)
    if cls is None:
        raise ProtocolError(f"unknown message type {msg_type}")
    try:
        return cls.parse(payload)
    except ProtocolError:
        raise
    except Exception as exc:
        raise ProtocolError(f"malformed {cls.__name__} payload: {exc}") from exc


def read_message(read_exact) -> Message | None:
    """Read one frame via read_exact(nbytes) -> bytes.

    read_exact returns b'' on a clean end of stream; returns None then.
    Truncation inside a frame raises ProtocolError.
    """
    header = read_exact(4)
    if not header:
        return None
    if len(header) != 4:
        raise ProtocolError("stream truncated inside frame header")
    (length,) = _LEN.unpack(header)
    rest = read_exact(1 + length)
    if len(rest) != 1 + length:
        raise ProtocolError("stream truncated inside frame body")
    return decode_frame_body(rest[0], rest[1:])


def _sock_read_exact(sock, n: int) -> bytes:
    data = b""
    while len(data) < n:
        chunk = sock.recv(n - len(data))
        if not chunk:
            return data  # caller distinguishes clean EOF from truncation
        data += chunk
    return data


def send_message(sock, msg: Message) -> None:
    sock.sendall(encode_message(msg))


def recv_message(sock) -> Message | None:
    """One framed message from a socket, or None on clean EOF."""
    return read_message(lambda n: _sock_read_exact(sock, n))
