"""Console server: services the four channels and paces frame execution.

Scheduling has two modes. Throttled mode free-runs frames at
``speed_percent`` of 60 fps against the wall clock, like a live console.
Fast mode is gated: a frame executes only while there is scheduled work
(pending control events, an animating cartridge, or a sound still playing
while audio is recorded) and the loop otherwise blocks on channel input.
Gating is what makes interactive sessions bit-reproducible, because every
client request then lands on a frame boundary that is a pure function of
the message history.
"""

from __future__ import annotations

import select
import struct
import time

from . import protocol as p
from .buttons import ControlEvent, ControlKind
from .console import SAMPLE_RATE, VirtualConsole
from .errors import (
    AlreadyRecording,
    InvalidSpeed,
    NotRecording,
    OutOfBounds,
    StorageError,
    UnknownGame,
    UnknownStart,
    UnknownState,
    VcleError,
)
from .snapshot import SnapshotStore, valid_name
from .transport import Endpoints

_ERROR_STATUS = {
    OutOfBounds: p.ST_OUT_OF_BOUNDS,
    UnknownState: p.ST_UNKNOWN_STATE,
    NotRecording: p.ST_NOT_RECORDING,
    AlreadyRecording: p.ST_ALREADY_RECORDING,
    InvalidSpeed: p.ST_INVALID_SPEED,
    StorageError: p.ST_IO_ERROR,
    UnknownGame: p.ST_UNKNOWN_GAME,
    UnknownStart: p.ST_UNKNOWN_START,
}


def status_for(exc: Exception) -> int:
    for cls, code in _ERROR_STATUS.items():
        if isinstance(exc, cls):
            return code
    return p.ST_BAD_REQUEST


class ConsoleServer:
    def __init__(
        self,
        console: VirtualConsole,
        endpoints: Endpoints,
        fast: bool = False,
        persist_dir=None,
    ):
        self.console = console
        self.ep = endpoints
        self.fast = fast
        self.store = SnapshotStore(persist_dir)
        self._decoders = {
            "b": p.Decoder("b"),
            "c": p.Decoder("c"),
            "d": p.Decoder("d"),
        }
        self._fd_channel = {endpoints.b: "b", endpoints.c: "c", endpoints.d: "d"}
        self._killed = False
        self._eof = False
        self._next_frame_at = None

    # Event loop --------------------------------------------------------

    def serve_forever(self) -> None:
        try:
            while not (self._killed or self._eof):
                self._pump()
        finally:
            self.ep.close()

    def _pump(self) -> None:
        con = self.console
        if con.frozen:
            timeout = None
        elif self.fast:
            timeout = 0 if con.has_work() else None
        else:
            now = time.monotonic()
            if self._next_frame_at is None:
                self._next_frame_at = now
            timeout = max(0.0, self._next_frame_at - now)

        readable, _, _ = select.select(
            [self.ep.b, self.ep.c, self.ep.d], [], [], timeout
        )
        for fd in readable:
            self._drain(fd)
        if self._killed or self._eof or con.frozen:
            return

        if self.fast:
            if con.has_work():
                self._step()
        else:
            now = time.monotonic()
            if self._next_frame_at is None:
                self._next_frame_at = now
            if now >= self._next_frame_at:
                self._step()
                period = 100.0 / (60.0 * con.speed_percent)
                self._next_frame_at += period
                if now - self._next_frame_at > 0.25:
                    # Fell far behind wall time; resynchronize instead of
                    # bursting frames.
                    self._next_frame_at = now

    def _step(self) -> None:
        for watch_id, addr, data in self.console.step_frame():
            self._send(p.msg_mem_changed(watch_id, addr, data))

    def _drain(self, fd: int) -> None:
        import os

        channel = self._fd_channel[fd]
        try:
            chunk = os.read(fd, 65536)
        except OSError:
            chunk = b""
        if not chunk:
            self._eof = True
            return
        for msg in self._decoders[channel].feed(chunk):
            self._dispatch(channel, msg)

    def _send(self, msg: p.ProtocolMessage) -> None:
        import os

        data = p.encode(msg)
        try:
            while data:
                n = os.write(self.ep.a, data)
                data = data[n:]
        except OSError:
            self._eof = True

    # Dispatch ----------------------------------------------------------

    def _dispatch(self, channel: str, msg: p.ProtocolMessage) -> None:
        if channel == "c":
            self._on_control(msg)
        elif channel == "b":
            self._on_watch(msg)
        else:
            self._on_instruction(msg)

    def _on_control(self, msg: p.ProtocolMessage) -> None:
        op = msg.opcode
        if op == p.OP_HOLD:
            self.console.queue_control(ControlEvent(ControlKind.HOLD, msg.payload[0]))
        elif op == p.OP_RELEASE:
            self.console.queue_control(ControlEvent(ControlKind.RELEASE, msg.payload[0]))
        elif op == p.OP_DELAY:
            (ms,) = struct.unpack(">I", msg.payload)
            self.console.queue_control(ControlEvent(ControlKind.DELAY, ms))

    def _on_watch(self, msg: p.ProtocolMessage) -> None:
        op = msg.opcode
        try:
            if op == p.OP_WATCH:
                watch_id, addr, length = struct.unpack(">HIH", msg.payload)
                self.console.add_watch(watch_id, addr, length)
            elif op == p.OP_CLEAR_ALL:
                self.console.clear_watches()
            elif op == p.OP_SLEEP:
                self.console.sleep_watch(struct.unpack(">H", msg.payload)[0])
            elif op == p.OP_WAKE:
                self.console.wake_watch(struct.unpack(">H", msg.payload)[0])
        except VcleError:
            # Watch configuration is fire-and-forget; bad requests are
            # dropped rather than crashing the session.
            pass

    def _on_instruction(self, msg: p.ProtocolMessage) -> None:
        (req_id,) = struct.unpack_from(">H", msg.payload)
        body = msg.payload[2:]
        op = msg.opcode
        con = self.console
        try:
            if op == p.OP_LOAD_GAME:
                name, _ = p.unpack_name(body)
                con.cartridge.load(name)
                con.clear_controls()
                con._active_sounds = []
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_SAVE_STATE:
                name, _ = p.unpack_name(body)
                if not valid_name(name):
                    self._send(p.msg_event_done(req_id, p.ST_BAD_REQUEST))
                    return
                self.store.save(name, con.snapshot_state())
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_LOAD_STATE:
                name, _ = p.unpack_name(body)
                con.restore_state(self.store.load(name))
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_FREEZE:
                con.frozen = True
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_UNFREEZE:
                con.frozen = False
                self._next_frame_at = None
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_SET_SPEED:
                (pct,) = struct.unpack(">I", body)
                if pct < 1:
                    raise InvalidSpeed(str(pct))
                con.speed_percent = pct
                self._next_frame_at = None
                self._send(p.msg_reply(req_id, b""))
            elif op == p.OP_READ:
                addr, length = struct.unpack(">IH", body)
                self._send(p.msg_reply(req_id, con.read_bytes(addr, length)))
            elif op == p.OP_WRITE:
                addr, value = struct.unpack(">IB", body)
                con.write_byte(addr, value)
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_GET_SCREEN:
                screen = con.get_screen()
                header = struct.pack(">HH", screen.shape[1], screen.shape[0])
                self._send(p.msg_reply(req_id, header + screen.tobytes()))
            elif op == p.OP_AUDIO_START:
                con.start_recording()
                self._send(p.msg_event_done(req_id, p.ST_OK))
            elif op == p.OP_AUDIO_STOP:
                samples = con.stop_recording()
                header = struct.pack(">II", SAMPLE_RATE, len(samples))
                self._send(p.msg_reply(req_id, header + samples.astype(">i2").tobytes()))
            elif op == p.OP_KILL:
                self._send(p.msg_event_done(req_id, p.ST_OK))
                self._killed = True
        except VcleError as exc:
            self._send(p.msg_event_done(req_id, status_for(exc)))
