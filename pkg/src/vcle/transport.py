"""Byte transports for the four console channels.

The reference transport is four named FIFOs under a session directory
({session}/a..d); in-process sessions use plain pipes. Channel A flows
console -> client, channels B, C and D flow client -> console. Any
reliable ordered byte transport is conformant.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

CHANNELS = ("a", "b", "c", "d")


@dataclass
class Endpoints:
    """One side's file descriptors for channels a-d."""

    a: int
    b: int
    c: int
    d: int

    def close(self) -> None:
        for fd in (self.a, self.b, self.c, self.d):
            try:
                os.close(fd)
            except OSError:
                pass


def pipe_pair() -> tuple[Endpoints, Endpoints]:
    """In-process transport; returns (server_side, client_side)."""
    a_r, a_w = os.pipe()
    b_r, b_w = os.pipe()
    c_r, c_w = os.pipe()
    d_r, d_w = os.pipe()
    server = Endpoints(a=a_w, b=b_r, c=c_r, d=d_r)
    client = Endpoints(a=a_r, b=b_w, c=c_w, d=d_w)
    return server, client


def fifo_create(session_dir: str | Path) -> Path:
    path = Path(session_dir)
    path.mkdir(parents=True, exist_ok=True)
    for name in CHANNELS:
        fifo = path / name
        if fifo.exists():
            fifo.unlink()
        os.mkfifo(fifo)
    return path


def fifo_open_server(session_dir: str | Path) -> Endpoints:
    """Open the server ends. Blocks until the client opens its side.

    Both sides open the channels in the same a, b, c, d order, so the
    matching blocking opens pair up.
    """
    path = Path(session_dir)
    a = os.open(path / "a", os.O_WRONLY)
    b = os.open(path / "b", os.O_RDONLY)
    c = os.open(path / "c", os.O_RDONLY)
    d = os.open(path / "d", os.O_RDONLY)
    return Endpoints(a=a, b=b, c=c, d=d)


def fifo_open_client(session_dir: str | Path) -> Endpoints:
    path = Path(session_dir)
    a = os.open(path / "a", os.O_RDONLY)
    b = os.open(path / "b", os.O_WRONLY)
    c = os.open(path / "c", os.O_WRONLY)
    d = os.open(path / "d", os.O_WRONLY)
    return Endpoints(a=a, b=b, c=c, d=d)


class ChannelRecorder:
    """Tees per-channel byte streams into {dir}/{a,b,c,d}.bin dump files."""

    def __init__(self, out_dir: str | Path):
        self._dir = Path(out_dir)
        self._dir.mkdir(parents=True, exist_ok=True)
        self._files = {name: open(self._dir / f"{name}.bin", "wb") for name in CHANNELS}

    def record(self, channel: str, data: bytes) -> None:
        self._files[channel].write(data)

    def close(self) -> None:
        for f in self._files.values():
            f.close()
