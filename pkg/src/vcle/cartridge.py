"""Cartridge plug-in interface for the virtual console.

A cartridge owns the game logic. The console calls ``tick`` once per frame
with the currently held buttons, pulls ``render`` lazily when a frame copy
is requested, and serializes the cartridge opaquely into snapshots.
"""

from __future__ import annotations

import numpy as np


class Cartridge:
    name = "null"

    def attach(self, console) -> None:
        """Called once when plugged in; gives the cartridge its console."""
        self.console = console

    def load(self, name: str) -> None:
        """Load a game/level by name. Raises UnknownGame / UnknownStart."""
        raise NotImplementedError

    def tick(self, held: frozenset[int]) -> None:
        """Advance one frame of game logic."""
        raise NotImplementedError

    def render(self, fb: np.ndarray) -> None:
        """Draw the current state into ``fb`` (H x W x 3 uint8, modified in place).

        Must be a pure function of cartridge state so deferred rendering is
        unobservable.
        """
        raise NotImplementedError

    def busy(self) -> bool:
        """True while an animation or transition still needs frames."""
        return False

    def sound_active(self) -> bool:
        """True while an emitted sound is still playing out."""
        return False

    def serialize(self) -> bytes:
        raise NotImplementedError

    def restore(self, blob: bytes) -> None:
        raise NotImplementedError


class NullCartridge(Cartridge):
    """Idle cartridge used when nothing is loaded; renders a flat test field."""

    name = "null"

    def load(self, name: str) -> None:
        pass

    def tick(self, held: frozenset[int]) -> None:
        pass

    def render(self, fb: np.ndarray) -> None:
        fb[:] = 16

    def serialize(self) -> bytes:
        return b""

    def restore(self, blob: bytes) -> None:
        pass
