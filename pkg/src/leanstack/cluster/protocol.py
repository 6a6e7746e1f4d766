"""Framed wire protocol between leader and worker daemons.

Frame layout: 4-byte big-endian length, 1-byte type, payload. The
length covers the type byte plus the payload. Control payloads are
UTF-8 JSON; DATA payloads are raw file bytes.
"""

from __future__ import annotations

import json
import socket
import struct

from ..errors import ProtocolError

HELLO = 0x01
PUT_CHUNK = 0x02
EXEC_PIPELINE = 0x03
STREAM_FILE = 0x04
DATA = 0x05
END = 0x06
OK = 0x07
ERR = 0x08
DELETE_JOB = 0x09

FRAME_NAMES = {
    HELLO: "HELLO",
    PUT_CHUNK: "PUT_CHUNK",
    EXEC_PIPELINE: "EXEC_PIPELINE",
    STREAM_FILE: "STREAM_FILE",
    DATA: "DATA",
    END: "END",
    OK: "OK",
    ERR: "ERR",
    DELETE_JOB: "DELETE_JOB",
}

MAX_FRAME = 64 * 1024 * 1024
DATA_CHUNK = 256 * 1024  # bytes of file content per DATA frame

_HEADER = struct.Struct(">IB")


def send_frame(sock: socket.socket, ftype: int, payload: bytes = b"") -> None:
    sock.sendall(_HEADER.pack(len(payload) + 1, ftype) + payload)


def send_json(sock: socket.socket, ftype: int, obj: dict) -> None:
    send_frame(sock, ftype, json.dumps(obj, separators=(",", ":")).encode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    parts = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise ProtocolError("connection closed mid-frame")
        parts.append(chunk)
        n -= len(chunk)
    return b"".join(parts)


def recv_frame(sock: socket.socket) -> tuple[int, bytes] | None:
    """Receive one frame; None on clean EOF at a frame boundary."""
    head = b""
    while len(head) < _HEADER.size:
        chunk = sock.recv(_HEADER.size - len(head))
        if not chunk:
            if head:
                raise ProtocolError("connection closed mid-header")
            return None
        head += chunk
    length, ftype = _HEADER.unpack(head)
    if length < 1 or length > MAX_FRAME:
        raise ProtocolError(f"invalid frame length {length}")
    if ftype not in FRAME_NAMES:
        raise ProtocolError(f"unknown frame type 0x{ftype:02x}")
    return ftype, _recv_exact(sock, length - 1)


def decode_json(payload: bytes) -> dict:
    try:
        obj = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError(f"malformed control payload: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("control payload must be a JSON object")
    return obj


def expect(sock: socket.socket, *types: int) -> tuple[int, bytes]:
    frame = recv_frame(sock)
    if frame is None:
        raise ProtocolError("connection closed while awaiting reply")
    ftype, payload = frame
    if ftype not in types:
        wanted = "/".join(FRAME_NAMES[t] for t in types)
        raise ProtocolError(f"expected {wanted}, got {FRAME_NAMES[ftype]}")
    return ftype, payload
