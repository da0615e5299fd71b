"""Controller buttons and control events."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class Button(IntEnum):
    """The 14 controller buttons, numbered 0-13."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    CROSS = 4
    CIRCLE = 5
    SQUARE = 6
    TRIANGLE = 7
    L1 = 8
    L2 = 9
    R1 = 10
    R2 = 11
    START = 12
    SELECT = 13


class ControlKind(IntEnum):
    HOLD = 0
    RELEASE = 1
    DELAY = 2


@dataclass(frozen=True)
class ControlEvent:
    """One queued controller action: press, release, or an inter-event delay.

    ``arg`` is the button id for HOLD/RELEASE and the delay in milliseconds
    for DELAY.
    """

    kind: ControlKind
    arg: int

    def __post_init__(self):
        if self.kind in (ControlKind.HOLD, ControlKind.RELEASE):
            if not 0 <= self.arg <= 13:
                raise ValueError(f"button id out of range: {self.arg}")
        elif self.arg < 0:
            raise ValueError("delay must be non-negative")


def delay_ms_to_frames(ms: int) -> int:
    """Convert a millisecond delay to whole frames at 60 fps, rounding half up."""
    return (ms * 60 + 500) // 1000
