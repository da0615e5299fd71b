"""Snapshot serialization.

File layout: magic ``VCLE``, format version u16, then four u32
length-prefixed sections in fixed order: deflate-compressed RAM, raw
framebuffer pixels, the opaque cartridge blob, and console counters
(frame counter, speed, controller and mixer state).
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .console import RAM_SIZE, SCREEN_H, SCREEN_W
from .errors import StorageError, UnknownState

MAGIC = b"VCLE"
VERSION = 1


def pack_snapshot(console) -> bytes:
    sections = [
        zlib.compress(bytes(console.ram), level=1),
        console.get_screen().tobytes(),
        console.cartridge.serialize(),
        console._pack_console_section(),
    ]
    out = bytearray(MAGIC)
    out += struct.pack(">H", VERSION)
    for sec in sections:
        out += struct.pack(">I", len(sec))
        out += sec
    return bytes(out)


def unpack_snapshot(console, blob: bytes) -> None:
    if blob[:4] != MAGIC:
        raise StorageError("bad snapshot magic")
    (version,) = struct.unpack_from(">H", blob, 4)
    if version != VERSION:
        raise StorageError(f"unsupported snapshot version {version}")
    off = 6
    sections = []
    for _ in range(4):
        (n,) = struct.unpack_from(">I", blob, off)
        off += 4
        sections.append(blob[off:off + n])
        off += n
    ram = zlib.decompress(sections[0])
    if len(ram) != RAM_SIZE:
        raise StorageError("snapshot RAM size mismatch")
    console.ram[:] = ram
    fb = np.frombuffer(sections[1], dtype=np.uint8)
    console._fb = fb.reshape(SCREEN_H, SCREEN_W, 3).copy()
    console._fb_dirty = False
    console.cartridge.restore(sections[2])
    console._unpack_console_section(sections[3])


def valid_name(name: str) -> bool:
    return bool(name) and all(c.isalnum() or c in "._-" for c in name)


class SnapshotStore:
    """Named in-session snapshot store with optional directory persistence."""

    def __init__(self, persist_dir: str | Path | None = None):
        self._mem: dict[str, bytes] = {}
        self._dir = Path(persist_dir) if persist_dir else None

    def save(self, name: str, blob: bytes) -> None:
        self._mem[name] = blob
        if self._dir is not None:
            try:
                self._dir.mkdir(parents=True, exist_ok=True)
                (self._dir / f"{name}.vcle").write_bytes(blob)
            except OSError as exc:
                raise StorageError(str(exc)) from exc

    def load(self, name: str) -> bytes:
        if name in self._mem:
            return self._mem[name]
        if self._dir is not None:
            path = self._dir / f"{name}.vcle"
            if path.exists():
                try:
                    return path.read_bytes()
                except OSError as exc:
                    raise StorageError(str(exc)) from exc
        raise UnknownState(name)
