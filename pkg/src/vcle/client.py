"""Client-side console handle speaking the four-channel protocol.

A ``ConsoleClient`` either hosts an in-process console on a server thread
(the default) or connects to an externally served FIFO session. The handle
is thread-safe: instruction submission is serialized and correlated by
request id, while memory-change notifications are delivered in channel
order on a dedicated notification thread. Listener callbacks run on that
thread and must not block it.
"""

from __future__ import annotations

import os
import queue
import struct
import threading

import numpy as np

from . import protocol as p
from . import transport
from .buttons import Button
from .cartridge import Cartridge
from .console import VirtualConsole
from .errors import (
    AlreadyRecording,
    AlreadyRunning,
    InvalidSpeed,
    NotRecording,
    NotRunning,
    OutOfBounds,
    StorageError,
    UnknownGame,
    UnknownStart,
    UnknownState,
    UnknownWatch,
    VcleError,
)
from .server import ConsoleServer

_STATUS_ERRORS = {
    p.ST_OUT_OF_BOUNDS: OutOfBounds,
    p.ST_UNKNOWN_STATE: UnknownState,
    p.ST_NOT_RECORDING: NotRecording,
    p.ST_ALREADY_RECORDING: AlreadyRecording,
    p.ST_INVALID_SPEED: InvalidSpeed,
    p.ST_IO_ERROR: StorageError,
    p.ST_UNKNOWN_GAME: UnknownGame,
    p.ST_UNKNOWN_START: UnknownStart,
    p.ST_BAD_REQUEST: VcleError,
}

DEFAULT_TOUCH_MS = 50


class _Pending:
    __slots__ = ("event", "reply", "status")

    def __init__(self):
        self.event = threading.Event()
        self.reply = None
        self.status = None


class ConsoleClient:
    """Lifecycle, controller, RAM listener and audio/visual capture API."""

    def __init__(
        self,
        cartridge: Cartridge | str = "kula",
        fast: bool = True,
        speed: int = 100,
        persist_dir=None,
        transcript_dir=None,
        cartridge_kwargs: dict | None = None,
    ):
        self._cartridge_spec = cartridge
        self._cartridge_kwargs = cartridge_kwargs or {}
        self._fast = fast
        self._initial_speed = speed
        self._persist_dir = persist_dir
        self._recorder = (
            transport.ChannelRecorder(transcript_dir) if transcript_dir else None
        )

        self._ep: transport.Endpoints | None = None
        self._server_thread: threading.Thread | None = None
        self._reader_thread: threading.Thread | None = None
        self._notify_thread: threading.Thread | None = None
        self._session_dir = None

        self._lock = threading.Lock()
        self._send_lock = threading.Lock()
        self._pending: dict[int, _Pending] = {}
        self._next_req = 0
        self._next_watch = 0
        self._listeners: dict[int, tuple] = {}
        self._notifications: queue.Queue = queue.Queue()
        self._speed = speed
        self._running = False

    # Lifecycle ---------------------------------------------------------

    def run(self) -> "ConsoleClient":
        """Start an in-process console session."""
        if self._running:
            raise AlreadyRunning()
        if isinstance(self._cartridge_spec, str):
            cart = _make_cartridge(self._cartridge_spec, self._cartridge_kwargs)
        else:
            cart = self._cartridge_spec
        console = VirtualConsole(cart)
        console.speed_percent = self._initial_speed
        server_ep, client_ep = transport.pipe_pair()
        server = ConsoleServer(
            console, server_ep, fast=self._fast, persist_dir=self._persist_dir
        )
        self._server_thread = threading.Thread(
            target=server.serve_forever, name="vcle-server", daemon=True
        )
        self._start_session(client_ep)
        self._server_thread.start()
        return self

    def connect(self, session_dir) -> "ConsoleClient":
        """Attach to an externally served FIFO session."""
        if self._running:
            raise AlreadyRunning()
        self._session_dir = session_dir
        self._start_session(transport.fifo_open_client(session_dir))
        return self

    def _start_session(self, ep: transport.Endpoints) -> None:
        self._ep = ep
        self._pending.clear()
        self._listeners.clear()
        self._notifications = queue.Queue()
        self._running = True
        self._speed = self._initial_speed
        self._reader_thread = threading.Thread(
            target=self._read_loop, name="vcle-reader", daemon=True
        )
        self._notify_thread = threading.Thread(
            target=self._notify_loop, name="vcle-notify", daemon=True
        )
        self._reader_thread.start()
        self._notify_thread.start()

    def kill(self) -> None:
        """Stop the session; all channels close and watches are discarded."""
        self._check_running()
        try:
            self._request(p.msg_kill, timeout=5.0)
        except VcleError:
            pass
        self._teardown()

    def _teardown(self) -> None:
        self._running = False
        if self._ep is not None:
            self._ep.close()
        self._notifications.put(None)
        for waiter in list(self._pending.values()):
            waiter.status = -1
            waiter.event.set()
        self._pending.clear()
        for t in (self._reader_thread, self._notify_thread, self._server_thread):
            if t is not None and t is not threading.current_thread():
                t.join(timeout=5.0)
        self._server_thread = None
        if self._recorder is not None:
            self._recorder.close()
            self._recorder = None

    def _check_running(self) -> None:
        if not self._running:
            raise NotRunning()

    @property
    def running(self) -> bool:
        return self._running

    # Reader / notifier ---------------------------------------------------

    def _read_loop(self) -> None:
        decoder = p.Decoder("a")
        while True:
            try:
                chunk = os.read(self._ep.a, 65536)
            except OSError:
                chunk = b""
            if not chunk:
                break
            if self._recorder is not None:
                self._recorder.record("a", chunk)
            for msg in decoder.feed(chunk):
                self._on_message(msg)
        if self._running:
            self._running = False
            self._notifications.put(None)
            for waiter in list(self._pending.values()):
                waiter.status = -1
                waiter.event.set()

    def _on_message(self, msg: p.ProtocolMessage) -> None:
        if msg.opcode == p.OP_MEM_CHANGED:
            watch_id, addr, length = struct.unpack_from(">HIH", msg.payload)
            data = msg.payload[8:8 + length]
            self._notifications.put((watch_id, addr, data))
            return
        (req_id,) = struct.unpack_from(">H", msg.payload)
        waiter = self._pending.pop(req_id, None)
        if waiter is None:
            return
        if msg.opcode == p.OP_EVENT_DONE:
            waiter.status = msg.payload[2]
        else:
            waiter.status = p.ST_OK
            waiter.reply = msg.payload[2:]
        waiter.event.set()

    def _notify_loop(self) -> None:
        while True:
            item = self._notifications.get()
            if item is None:
                self._notifications.task_done()
                break
            watch_id, addr, data = item
            entry = self._listeners.get(watch_id)
            if entry is not None:
                _addr, length, subscriber = entry
                try:
                    subscriber(addr, length, data)
                finally:
                    self._notifications.task_done()
            else:
                self._notifications.task_done()

    def sync_notifications(self) -> None:
        """Block until every notification received so far has been delivered.

        Channel A preserves console order, so after a synchronous call
        returns, joining the queue fences all earlier listener callbacks.
        """
        self._notifications.join()

    # Requests ------------------------------------------------------------

    def _send_raw(self, channel: str, data: bytes) -> None:
        fd = getattr(self._ep, channel)
        if self._recorder is not None:
            self._recorder.record(channel, data)
        with self._send_lock:
            while data:
                n = os.write(fd, data)
                data = data[n:]

    def _request(self, builder, *args, timeout: float = 60.0):
        """Send one instruction and block for its REPLY or EVENT_DONE."""
        self._check_running()
        with self._lock:
            req_id = self._next_req
            self._next_req = (self._next_req + 1) & 0xFFFF
            waiter = _Pending()
            self._pending[req_id] = waiter
        try:
            self._send_raw("d", p.encode(builder(req_id, *args)))
        except OSError:
            self._pending.pop(req_id, None)
            raise NotRunning() from None
        if not waiter.event.wait(timeout):
            self._pending.pop(req_id, None)
            raise VcleError("request timed out")
        if waiter.status == -1:
            raise NotRunning()
        if waiter.status != p.ST_OK:
            raise _STATUS_ERRORS.get(waiter.status, VcleError)()
        return waiter.reply

    # Controller ------------------------------------------------------------

    def hold_button(self, button: Button) -> None:
        self._check_running()
        self._send_raw("c", p.encode(p.msg_hold(int(button))))

    def release_button(self, button: Button) -> None:
        self._check_running()
        self._send_raw("c", p.encode(p.msg_release(int(button))))

    def touch_button(self, button: Button, hold_ms: int = DEFAULT_TOUCH_MS) -> None:
        """Hold, pause ``hold_ms`` of console time, then release.

        The three frames go out in one write so they always land in the
        same control batch.
        """
        self._check_running()
        self._send_raw(
            "c",
            p.encode(p.msg_hold(int(button)))
            + p.encode(p.msg_delay(hold_ms))
            + p.encode(p.msg_release(int(button))),
        )

    def delay_button(self, ms: int) -> None:
        self._check_running()
        self._send_raw("c", p.encode(p.msg_delay(ms)))

    def press_chord(self, buttons: list[Button], hold_ms: int = DEFAULT_TOUCH_MS) -> None:
        """Hold several buttons on the same frame, then release them together."""
        self._check_running()
        data = b"".join(p.encode(p.msg_hold(int(b))) for b in buttons)
        data += p.encode(p.msg_delay(hold_ms))
        data += b"".join(p.encode(p.msg_release(int(b))) for b in buttons)
        self._send_raw("c", data)

    # Memory listeners -----------------------------------------------------

    def add_memory_listener(self, addr: int, length: int, subscriber) -> int:
        """Watch a RAM region; ``subscriber(addr, len, new_bytes)`` fires per change."""
        self._check_running()
        if addr < 0 or length < 0 or addr + length > 2 * 1024 * 1024:
            raise OutOfBounds(f"listener of {length} bytes at 0x{addr:X}")
        with self._lock:
            watch_id = self._next_watch
            self._next_watch = (self._next_watch + 1) & 0xFFFF
            self._listeners[watch_id] = (addr, length, subscriber)
        self._send_raw("b", p.encode(p.msg_watch(watch_id, addr, length)))
        return watch_id

    def clear_memory_listeners(self) -> None:
        self._check_running()
        self._listeners.clear()
        self._send_raw("b", p.encode(p.msg_clear_all()))

    def sleep_memory_listener(self, watch_id: int) -> None:
        self._check_running()
        if watch_id not in self._listeners:
            raise UnknownWatch(str(watch_id))
        self._send_raw("b", p.encode(p.msg_sleep(watch_id)))

    def wake_memory_listener(self, watch_id: int) -> None:
        self._check_running()
        if watch_id not in self._listeners:
            raise UnknownWatch(str(watch_id))
        self._send_raw("b", p.encode(p.msg_wake(watch_id)))

    # Instructions -----------------------------------------------------------

    def load_game(self, name: str) -> None:
        self._request(p.msg_load_game, name)

    def save_state(self, name: str) -> None:
        self._request(p.msg_save_state, name)

    def load_state(self, name: str) -> None:
        self._request(p.msg_load_state, name)

    def freeze(self) -> None:
        self._request(p.msg_freeze)

    def unfreeze(self) -> None:
        self._request(p.msg_unfreeze)

    @property
    def speed(self) -> int:
        return self._speed

    @speed.setter
    def speed(self, percent: int) -> None:
        self._request(p.msg_set_speed, percent)
        self._speed = percent

    def read_bytes(self, addr: int, length: int) -> bytes:
        return self._request(p.msg_read, addr, length)

    def write_byte(self, addr: int, value: int) -> None:
        self._request(p.msg_write, addr, value)

    def get_screen(self) -> np.ndarray:
        reply = self._request(p.msg_get_screen)
        w, h = struct.unpack_from(">HH", reply)
        pixels = np.frombuffer(reply, dtype=np.uint8, offset=4)
        return pixels.reshape(h, w, 3).copy()

    def start_recording_audio(self) -> None:
        self._request(p.msg_audio_start)

    def stop_recording_audio(self) -> np.ndarray:
        reply = self._request(p.msg_audio_stop)
        rate, count = struct.unpack_from(">II", reply)
        samples = np.frombuffer(reply, dtype=">i2", offset=8, count=count)
        return samples.astype(np.int16)


def _make_cartridge(name: str, kwargs: dict) -> Cartridge:
    if name == "kula":
        from .kula import KulaCartridge

        return KulaCartridge(**kwargs)
    if name == "null":
        from .cartridge import NullCartridge

        return NullCartridge()
    raise UnknownGame(name)
