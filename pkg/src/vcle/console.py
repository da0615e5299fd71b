"""Deterministic frame-stepped virtual console.

The console owns 2 MiB of RAM, a 320x240 RGB framebuffer, a 22,050 Hz mono
audio mixer, a controller event queue and a set of memory watches, and hosts
one cartridge. All state advances in whole frames via ``step_frame``; pacing
and channel plumbing live in the server layer, so the core itself is fully
deterministic and directly testable.
"""

from __future__ import annotations

import struct

import numpy as np

from .buttons import ControlEvent, ControlKind, delay_ms_to_frames
from .cartridge import Cartridge, NullCartridge
from .errors import (
    AlreadyRecording,
    NotRecording,
    OutOfBounds,
    UnknownWatch,
)

RAM_SIZE = 2 * 1024 * 1024
SCREEN_W = 320
SCREEN_H = 240
FRAME_RATE = 60
SAMPLE_RATE = 22050


class Watch:
    __slots__ = ("watch_id", "addr", "length", "awake", "baseline")

    def __init__(self, watch_id: int, addr: int, length: int):
        self.watch_id = watch_id
        self.addr = addr
        self.length = length
        self.awake = True
        self.baseline = b""


class VirtualConsole:
    """Single-threaded console core; one instance per session."""

    def __init__(self, cartridge: Cartridge | None = None):
        self.ram = bytearray(RAM_SIZE)
        self.frame_counter = 0
        self.speed_percent = 100
        self.frozen = False
        self.cartridge = cartridge or NullCartridge()
        self.cartridge.attach(self)

        self._held: set[int] = set()
        self._queue: list[ControlEvent] = []
        self._queue_pos = 0
        self._delay_frames = 0

        self._fb = np.zeros((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
        self._fb_dirty = True

        # 22050/60 = 367.5 samples per frame; an accumulator keeps the
        # long-run rate exact without drift.
        self._audio_acc = 0
        self._active_sounds: list[list] = []  # [int16 array, position]
        self._recording: list[np.ndarray] | None = None

        self._watches: dict[int, Watch] = {}
        self.snapshots: dict[str, bytes] = {}

    # Controller ------------------------------------------------------

    def queue_control(self, event: ControlEvent) -> None:
        self._queue.append(event)

    def clear_controls(self) -> None:
        self._queue.clear()
        self._queue_pos = 0
        self._delay_frames = 0
        self._held.clear()

    def controls_pending(self) -> bool:
        return self._delay_frames > 0 or self._queue_pos < len(self._queue)

    def _apply_due_controls(self) -> None:
        if self._delay_frames > 0:
            self._delay_frames -= 1
            return
        held_this_frame: set[int] = set()
        while self._queue_pos < len(self._queue):
            ev = self._queue[self._queue_pos]
            if ev.kind == ControlKind.RELEASE and ev.arg in held_this_frame:
                # A press must stay visible for at least one frame: a
                # release of a button held this same frame waits for the
                # next boundary (a zero-duration touch still registers).
                break
            self._queue_pos += 1
            if ev.kind == ControlKind.HOLD:
                self._held.add(ev.arg)
                held_this_frame.add(ev.arg)
            elif ev.kind == ControlKind.RELEASE:
                self._held.discard(ev.arg)
            else:
                frames = delay_ms_to_frames(ev.arg)
                if frames > 0:
                    self._delay_frames = frames - 1
                    break
        if self._queue_pos >= len(self._queue):
            self._queue.clear()
            self._queue_pos = 0

    # RAM -------------------------------------------------------------

    def read_bytes(self, addr: int, length: int) -> bytes:
        if addr < 0 or length < 0 or addr + length > RAM_SIZE:
            raise OutOfBounds(f"read of {length} bytes at 0x{addr:X}")
        return bytes(self.ram[addr:addr + length])

    def write_byte(self, addr: int, value: int) -> None:
        if addr < 0 or addr >= RAM_SIZE:
            raise OutOfBounds(f"write at 0x{addr:X}")
        self.ram[addr] = value & 0xFF

    # Watches ---------------------------------------------------------

    def add_watch(self, watch_id: int, addr: int, length: int) -> None:
        if addr < 0 or length < 0 or addr + length > RAM_SIZE:
            raise OutOfBounds(f"watch of {length} bytes at 0x{addr:X}")
        w = Watch(watch_id, addr, length)
        w.baseline = bytes(self.ram[addr:addr + length])
        self._watches[watch_id] = w

    def clear_watches(self) -> None:
        self._watches.clear()

    def sleep_watch(self, watch_id: int) -> None:
        try:
            self._watches[watch_id].awake = False
        except KeyError:
            raise UnknownWatch(str(watch_id)) from None

    def wake_watch(self, watch_id: int) -> None:
        try:
            w = self._watches[watch_id]
        except KeyError:
            raise UnknownWatch(str(watch_id)) from None
        if not w.awake:
            w.awake = True
            # Changes made while asleep are not reported.
            w.baseline = bytes(self.ram[w.addr:w.addr + w.length])

    def _scan_watches(self) -> list[tuple[int, int, bytes]]:
        fired = []
        for w in self._watches.values():
            if not w.awake:
                continue
            current = bytes(self.ram[w.addr:w.addr + w.length])
            if current != w.baseline:
                w.baseline = current
                fired.append((w.watch_id, w.addr, current))
        return fired

    # Audio -----------------------------------------------------------

    def queue_sound(self, samples: np.ndarray) -> None:
        """Register a mono int16 waveform to be mixed starting next frame."""
        self._active_sounds.append([samples.astype(np.int16, copy=False), 0])

    def mixer_active(self) -> bool:
        return bool(self._active_sounds)

    def start_recording(self) -> None:
        if self._recording is not None:
            raise AlreadyRecording()
        self._recording = []

    def stop_recording(self) -> np.ndarray:
        if self._recording is None:
            raise NotRecording()
        chunks = self._recording
        self._recording = None
        if not chunks:
            return np.zeros(0, dtype=np.int16)
        return np.concatenate(chunks)

    @property
    def recording(self) -> bool:
        return self._recording is not None

    def _mix_frame_chunk(self) -> None:
        self._audio_acc += SAMPLE_RATE
        n = self._audio_acc // FRAME_RATE
        self._audio_acc -= n * FRAME_RATE
        if not self._active_sounds and self._recording is None:
            return
        chunk = np.zeros(n, dtype=np.int32)
        still = []
        for entry in self._active_sounds:
            samples, pos = entry
            take = min(n, len(samples) - pos)
            if take > 0:
                chunk[:take] += samples[pos:pos + take]
                entry[1] = pos + take
            if entry[1] < len(samples):
                still.append(entry)
        self._active_sounds = still
        if self._recording is not None:
            self._recording.append(np.clip(chunk, -32768, 32767).astype(np.int16))

    # Frame stepping ----------------------------------------------------

    def step_frame(self) -> list[tuple[int, int, bytes]]:
        """Advance one frame; returns (watch_id, addr, new bytes) notifications."""
        self._apply_due_controls()
        self.cartridge.tick(frozenset(self._held))
        self._mix_frame_chunk()
        self.frame_counter += 1
        self._fb_dirty = True
        return self._scan_watches()

    def has_work(self) -> bool:
        """True if the next frame would do something beyond idling.

        Drives gated execution in fast mode: pending control events, a busy
        cartridge, or a sound still playing while audio is being recorded.
        """
        return (
            self.controls_pending()
            or self.cartridge.busy()
            or (self._recording is not None and self.cartridge.sound_active())
        )

    def get_screen(self) -> np.ndarray:
        if self._fb_dirty:
            self.cartridge.render(self._fb)
            self._fb_dirty = False
        return self._fb.copy()

    # Snapshots ---------------------------------------------------------

    def snapshot_state(self) -> bytes:
        from .snapshot import pack_snapshot

        return pack_snapshot(self)

    def restore_state(self, blob: bytes) -> None:
        from .snapshot import unpack_snapshot

        unpack_snapshot(self, blob)
        # Restored bytes are the new reference point; the load itself is
        # not reported as a memory change.
        for w in self._watches.values():
            w.baseline = bytes(self.ram[w.addr:w.addr + w.length])

    def _pack_console_section(self) -> bytes:
        out = bytearray()
        out += struct.pack(">QIH", self.frame_counter, self.speed_percent, self._audio_acc)
        held_mask = 0
        for b in self._held:
            held_mask |= 1 << b
        out += struct.pack(">H", held_mask)
        pending = self._queue[self._queue_pos:]
        out += struct.pack(">IH", self._delay_frames, len(pending))
        for ev in pending:
            out += struct.pack(">BI", int(ev.kind), ev.arg)
        out += struct.pack(">H", len(self._active_sounds))
        for samples, pos in self._active_sounds:
            raw = samples.astype(">i2").tobytes()
            out += struct.pack(">II", pos, len(raw)) + raw
        return bytes(out)

    def _unpack_console_section(self, data: bytes) -> None:
        off = 0
        self.frame_counter, self.speed_percent, self._audio_acc = struct.unpack_from(
            ">QIH", data, off
        )
        off += 14
        (held_mask,) = struct.unpack_from(">H", data, off)
        off += 2
        self._held = {b for b in range(14) if held_mask & (1 << b)}
        self._delay_frames, n_events = struct.unpack_from(">IH", data, off)
        off += 6
        self._queue = []
        self._queue_pos = 0
        for _ in range(n_events):
            kind, arg = struct.unpack_from(">BI", data, off)
            off += 5
            self._queue.append(ControlEvent(ControlKind(kind), arg))
        (n_sounds,) = struct.unpack_from(">H", data, off)
        off += 2
        self._active_sounds = []
        for _ in range(n_sounds):
            pos, raw_len = struct.unpack_from(">II", data, off)
            off += 8
            samples = np.frombuffer(data[off:off + raw_len], dtype=">i2").astype(np.int16)
            off += raw_len
            self._active_sounds.append([samples, pos])
