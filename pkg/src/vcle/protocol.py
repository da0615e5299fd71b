"""Wire protocol for the four console channels.

Framing: a u32 big-endian length (covering opcode + payload), one opcode
byte, then the payload. All payload integers are big-endian; names and
other strings travel as u16 length-prefixed UTF-8. Channel roles:

* A  console -> client: memory-change notifications and request replies
* B  client -> console: watch configuration
* C  client -> console: controller events
* D  client -> console: instructions (each carries a u16 request id)

The full opcode registry with hex transcripts is documented in PROTOCOL.md.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .errors import FrameTooLarge, MalformedFrame, UnknownOpcode

MAX_PAYLOAD = 16 * 1024 * 1024

# Channel C: controller events
OP_HOLD = 0x01
OP_RELEASE = 0x02
OP_DELAY = 0x03

# Channel B: watch configuration
OP_WATCH = 0x10
OP_CLEAR_ALL = 0x11
OP_SLEEP = 0x12
OP_WAKE = 0x13

# Channel D: instructions (payload starts with a u16 request id)
OP_LOAD_GAME = 0x20
OP_LOAD_STATE = 0x21
OP_SAVE_STATE = 0x22
OP_FREEZE = 0x23
OP_UNFREEZE = 0x24
OP_SET_SPEED = 0x25
OP_READ = 0x26
OP_WRITE = 0x27
OP_GET_SCREEN = 0x28
OP_AUDIO_START = 0x29
OP_AUDIO_STOP = 0x2A
OP_KILL = 0x2B

# Channel A: notifications and replies
OP_MEM_CHANGED = 0x80
OP_EVENT_DONE = 0x81
OP_REPLY = 0x82

CHANNEL_OPCODES = {
    "a": frozenset({OP_MEM_CHANGED, OP_EVENT_DONE, OP_REPLY}),
    "b": frozenset({OP_WATCH, OP_CLEAR_ALL, OP_SLEEP, OP_WAKE}),
    "c": frozenset({OP_HOLD, OP_RELEASE, OP_DELAY}),
    "d": frozenset({
        OP_LOAD_GAME, OP_LOAD_STATE, OP_SAVE_STATE, OP_FREEZE, OP_UNFREEZE,
        OP_SET_SPEED, OP_READ, OP_WRITE, OP_GET_SCREEN, OP_AUDIO_START,
        OP_AUDIO_STOP, OP_KILL,
    }),
}

# Status codes carried by EVENT_DONE.
ST_OK = 0
ST_OUT_OF_BOUNDS = 1
ST_UNKNOWN_STATE = 2
ST_NOT_RECORDING = 3
ST_ALREADY_RECORDING = 4
ST_INVALID_SPEED = 5
ST_IO_ERROR = 6
ST_UNKNOWN_GAME = 7
ST_UNKNOWN_START = 8
ST_BAD_REQUEST = 9


@dataclass(frozen=True)
class ProtocolMessage:
    opcode: int
    payload: bytes = b""


def encode(msg: ProtocolMessage) -> bytes:
    """Serialize one message to its canonical frame bytes."""
    if len(msg.payload) > MAX_PAYLOAD:
        raise FrameTooLarge(f"payload of {len(msg.payload)} bytes exceeds 16 MiB")
    return struct.pack(">IB", 1 + len(msg.payload), msg.opcode) + msg.payload


class Decoder:
    """Incremental frame decoder for one channel's byte stream.

    ``feed`` accepts arbitrary chunks and yields every complete message, so
    the stream may be split at any byte boundary. A partial trailing frame
    is retained until more bytes arrive. When constructed with a channel
    role, opcodes outside that channel's registry raise ``UnknownOpcode``
    after the offending frame has been consumed, so decoding can continue.
    """

    def __init__(self, channel: str | None = None):
        if channel is not None and channel not in CHANNEL_OPCODES:
            raise ValueError(f"unknown channel role: {channel!r}")
        self._allowed = CHANNEL_OPCODES[channel] if channel else None
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[ProtocolMessage]:
        self._buf.extend(data)
        out = []
        while True:
            msg = self._next()
            if msg is None:
                return out
            out.append(msg)

    def _next(self) -> ProtocolMessage | None:
        if len(self._buf) < 4:
            return None
        (length,) = struct.unpack_from(">I", self._buf)
        if length < 1:
            del self._buf[:4]
            raise MalformedFrame("frame length must be at least 1")
        if len(self._buf) < 4 + length:
            return None
        opcode = self._buf[4]
        payload = bytes(self._buf[5:4 + length])
        del self._buf[:4 + length]
        if self._allowed is not None and opcode not in self._allowed:
            raise UnknownOpcode(f"opcode 0x{opcode:02X} is not valid on this channel")
        return ProtocolMessage(opcode, payload)

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)


def pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise FrameTooLarge("name too long")
    return struct.pack(">H", len(raw)) + raw


def unpack_name(payload: bytes, offset: int = 0) -> tuple[str, int]:
    (n,) = struct.unpack_from(">H", payload, offset)
    end = offset + 2 + n
    return payload[offset + 2:end].decode("utf-8"), end


# Message constructors, client -> console.

def msg_hold(button: int) -> ProtocolMessage:
    return ProtocolMessage(OP_HOLD, struct.pack(">B", button))


def msg_release(button: int) -> ProtocolMessage:
    return ProtocolMessage(OP_RELEASE, struct.pack(">B", button))


def msg_delay(ms: int) -> ProtocolMessage:
    return ProtocolMessage(OP_DELAY, struct.pack(">I", ms))


def msg_watch(watch_id: int, addr: int, length: int) -> ProtocolMessage:
    return ProtocolMessage(OP_WATCH, struct.pack(">HIH", watch_id, addr, length))


def msg_clear_all() -> ProtocolMessage:
    return ProtocolMessage(OP_CLEAR_ALL)


def msg_sleep(watch_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_SLEEP, struct.pack(">H", watch_id))


def msg_wake(watch_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_WAKE, struct.pack(">H", watch_id))


def msg_load_game(req_id: int, name: str) -> ProtocolMessage:
    return ProtocolMessage(OP_LOAD_GAME, struct.pack(">H", req_id) + pack_name(name))


def msg_load_state(req_id: int, name: str) -> ProtocolMessage:
    return ProtocolMessage(OP_LOAD_STATE, struct.pack(">H", req_id) + pack_name(name))


def msg_save_state(req_id: int, name: str) -> ProtocolMessage:
    return ProtocolMessage(OP_SAVE_STATE, struct.pack(">H", req_id) + pack_name(name))


def msg_freeze(req_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_FREEZE, struct.pack(">H", req_id))


def msg_unfreeze(req_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_UNFREEZE, struct.pack(">H", req_id))


def msg_set_speed(req_id: int, percent: int) -> ProtocolMessage:
    return ProtocolMessage(OP_SET_SPEED, struct.pack(">HI", req_id, percent))


def msg_read(req_id: int, addr: int, length: int) -> ProtocolMessage:
    return ProtocolMessage(OP_READ, struct.pack(">HIH", req_id, addr, length))


def msg_write(req_id: int, addr: int, value: int) -> ProtocolMessage:
    return ProtocolMessage(OP_WRITE, struct.pack(">HIB", req_id, addr, value))


def msg_get_screen(req_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_GET_SCREEN, struct.pack(">H", req_id))


def msg_audio_start(req_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_AUDIO_START, struct.pack(">H", req_id))


def msg_audio_stop(req_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_AUDIO_STOP, struct.pack(">H", req_id))


def msg_kill(req_id: int) -> ProtocolMessage:
    return ProtocolMessage(OP_KILL, struct.pack(">H", req_id))


# Message constructors, console -> client.

def msg_mem_changed(watch_id: int, addr: int, data: bytes) -> ProtocolMessage:
    return ProtocolMessage(
        OP_MEM_CHANGED, struct.pack(">HIH", watch_id, addr, len(data)) + data
    )


def msg_event_done(req_id: int, status: int) -> ProtocolMessage:
    return ProtocolMessage(OP_EVENT_DONE, struct.pack(">HB", req_id, status))


def msg_reply(req_id: int, payload: bytes) -> ProtocolMessage:
    return ProtocolMessage(OP_REPLY, struct.pack(">H", req_id) + payload)
