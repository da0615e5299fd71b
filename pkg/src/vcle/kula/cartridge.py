"""Rolling-ball grid puzzle cartridge.

The ball rolls over a platform grid collecting coins, fruit and keys; with
every key in hand the goal square wins the level. Falling off the platform,
touching a spike or running out of clock loses it. Input is edge-triggered
and ignored while a move animates, so each accepted input starts exactly
one move.

Game state is mirrored into console RAM once per frame at ``RAM_BASE``:

    +0x00 score u32   +0x04 clock_frames u32   +0x08 status u8
    +0x09 moving u8   +0x0A x u8   +0x0B y u8  +0x0C orientation u8
    +0x0D keys_remaining u8        +0x0E level_id u8
    +0x0F audio_active u8 (1 while an emitted sound is still sounding)
"""

from __future__ import annotations

import struct

import numpy as np

from ..buttons import Button
from ..cartridge import Cartridge
from ..errors import UnknownGame, UnknownStart
from . import levels as lv
from .render import render_game
from .sounds import SoundEvent, sound_frames, synth_sound

RAM_BASE = 0x0001_0000
RAM_MAP_LEN = 16

OFF_SCORE = 0
OFF_CLOCK = 4
OFF_STATUS = 8
OFF_MOVING = 9
OFF_X = 10
OFF_Y = 11
OFF_ORIENT = 12
OFF_KEYS = 13
OFF_LEVEL = 14
OFF_AUDIO = 15

PLAYING, WON, LOST_FALL, LOST_SPIKE, LOST_TIMEOUT = 0, 1, 2, 3, 4

STATUS_NAMES = {
    PLAYING: "playing",
    WON: "won",
    LOST_FALL: "fell",
    LOST_SPIKE: "spiked",
    LOST_TIMEOUT: "timeout",
}

# Animation lengths in frames. Collection variants run slower than plain
# moves; a jump runs a full second longer than a camera rotation.
DUR_ROTATE = 15
DUR_FORWARD = 30
DUR_FORWARD_COLLECT = 45
DUR_JUMP = 75
DUR_JUMP_COLLECT = 90
DUR_FALL = 90

_CHIMES = {"coin": SoundEvent.COIN, "key": SoundEvent.KEY, "fruit": SoundEvent.FRUIT}
_OBJ_CODE = {"coin": 1, "key": 2, "fruit": 3}
_CODE_OBJ = {v: k for k, v in _OBJ_CODE.items()}


class KulaCartridge(Cartridge):
    name = "kula"

    def __init__(self, level_specs: list[lv.LevelSpec] | None = None):
        self.levels = level_specs if level_specs is not None else lv.bundled_levels()
        self.spec: lv.LevelSpec | None = None
        self.time_limit_s = 0
        self.objects: dict[tuple[int, int], str] = {}
        self.x = self.y = 0
        self.orientation = 1
        self.score = 0
        self.clock_frames = 0
        self.status = PLAYING
        self.moving = 0
        self.keys_remaining = 0
        self.anim_remaining = 0
        self.anim_total = 0
        self.move_kind = ""
        self.move_from = (0, 0)
        self.move_to = (0, 0)
        self.pending_orientation = 0
        self.pending_collect: str | None = None
        self.last_scanned: frozenset[int] = frozenset()
        self.sound_countdown = 0
        self.anim_tick = 0

    # Loading -----------------------------------------------------------

    def _find_spec(self, token: str) -> lv.LevelSpec:
        for spec in self.levels:
            if token in (f"level{spec.level_id}", str(spec.level_id)):
                return spec
        raise UnknownGame(token)

    def load(self, name: str) -> None:
        """Load ``level<N>[:<start>][@<seconds>]``; start may be ``r`` (reserved)."""
        token = name
        time_override = None
        if "@" in token:
            token, _, t = token.partition("@")
            try:
                time_override = int(t)
            except ValueError:
                raise UnknownGame(name) from None
        start_sel = "0"
        if ":" in token:
            token, _, start_sel = token.partition(":")
        spec = self._find_spec(token)

        if start_sel == "r":
            if spec.reserved_start is None:
                raise UnknownStart(f"{token} has no reserved start")
            pose = spec.reserved_start
        else:
            try:
                idx = int(start_sel)
            except ValueError:
                raise UnknownStart(start_sel) from None
            if not 0 <= idx < len(spec.starts):
                raise UnknownStart(f"{token} start {idx}")
            pose = spec.starts[idx]

        self.spec = spec
        self.time_limit_s = time_override if time_override else spec.time_limit_s
        self.objects = dict(spec.objects)
        self.x, self.y, self.orientation = pose.x, pose.y, pose.orientation
        self.score = 0
        self.clock_frames = self.time_limit_s * 60
        self.status = PLAYING
        self.moving = 0
        self.keys_remaining = spec.key_count()
        self.anim_remaining = 0
        self.anim_total = 0
        self.move_kind = ""
        self.move_from = self.move_to = (pose.x, pose.y)
        self.pending_collect = None
        self.last_scanned = frozenset()
        self.sound_countdown = 0
        self.anim_tick = 0
        self._write_ram()

    # Frame logic ---------------------------------------------------------

    def tick(self, held: frozenset[int]) -> None:
        if self.sound_countdown > 0:
            self.sound_countdown -= 1
        if self.spec is None:
            return
        if self.status != PLAYING:
            self._write_audio_byte()
            return

        self.anim_tick += 1
        self.clock_frames -= 1
        if self.clock_frames <= 0:
            self.clock_frames = 0
            self.status = LOST_TIMEOUT
            self.moving = 0
            self._emit(SoundEvent.LOSE)
            self._write_ram()
            return

        if self.moving:
            # Input is ignored mid-move, but the edge tracker must keep
            # following the held set or releases made during the animation
            # would mask the next press.
            self.last_scanned = held
            self.anim_remaining -= 1
            if self.anim_remaining <= 0:
                self._complete_move()
        else:
            self._scan_input(held)
        self._write_ram()

    def _scan_input(self, held: frozenset[int]) -> None:
        new = held - self.last_scanned
        self.last_scanned = held
        up, cross = Button.UP in held, Button.CROSS in held
        if Button.UP in new:
            self._start_move("jump" if cross else "forward")
        elif Button.CROSS in new and up:
            self._start_move("jump")
        elif Button.LEFT in new:
            self._start_rotation(-1)
        elif Button.RIGHT in new:
            self._start_rotation(+1)

    def _start_rotation(self, direction: int) -> None:
        self.moving = 1
        self.move_kind = "rotate"
        self.anim_total = self.anim_remaining = DUR_ROTATE
        self.move_from = self.move_to = (self.x, self.y)
        self.pending_orientation = (self.orientation + direction) % 4
        self.pending_collect = None

    def _start_move(self, kind: str) -> None:
        dx, dy = lv.DELTAS[self.orientation]
        steps = 2 if kind == "jump" else 1
        target = (self.x + dx * steps, self.y + dy * steps)
        self.move_from = (self.x, self.y)
        self.move_to = target
        self.moving = 1
        self.pending_collect = None

        if self.spec.tile(*target) == lv.VOID:
            self.move_kind = "fall"
            self.anim_total = self.anim_remaining = DUR_FALL
            self._emit(SoundEvent.JUMP if kind == "jump" else SoundEvent.ROLL)
            return

        self.move_kind = kind
        collect = self.objects.get(target)
        if collect is not None:
            self.pending_collect = collect
            self.anim_total = DUR_JUMP_COLLECT if kind == "jump" else DUR_FORWARD_COLLECT
        else:
            self.anim_total = DUR_JUMP if kind == "jump" else DUR_FORWARD
            self._emit(SoundEvent.JUMP if kind == "jump" else SoundEvent.ROLL)
        self.anim_remaining = self.anim_total

    def _complete_move(self) -> None:
        self.moving = 0
        if self.move_kind == "rotate":
            self.orientation = self.pending_orientation
            return

        self.x, self.y = self.move_to
        if self.move_kind == "fall":
            self.status = LOST_FALL
            self._emit(SoundEvent.LOSE)
            return

        tile = self.spec.tile(self.x, self.y)
        if tile == lv.SPIKE:
            self.status = LOST_SPIKE
            self._emit(SoundEvent.LOSE)
            return

        collected = self.objects.pop((self.x, self.y), None)
        if collected is not None:
            self.score += lv.OBJECT_SCORES[collected]
            if collected == "key":
                self.keys_remaining -= 1
            self._emit(_CHIMES[collected])

        if tile == lv.GOAL and self.keys_remaining == 0:
            self.status = WON
            self._emit(SoundEvent.WIN)

    def _emit(self, event: SoundEvent) -> None:
        self.console.queue_sound(synth_sound(event))
        self.sound_countdown = max(self.sound_countdown, sound_frames(event))

    # Console integration ---------------------------------------------------

    def _write_ram(self) -> None:
        struct.pack_into(
            ">II8B", self.console.ram, RAM_BASE,
            self.score, self.clock_frames, self.status, self.moving,
            self.x & 0xFF, self.y & 0xFF, self.orientation,
            self.keys_remaining, self.spec.level_id if self.spec else 0,
            1 if self.sound_countdown > 0 else 0,
        )

    def _write_audio_byte(self) -> None:
        self.console.ram[RAM_BASE + OFF_AUDIO] = 1 if self.sound_countdown > 0 else 0

    def busy(self) -> bool:
        return self.moving == 1

    def sound_active(self) -> bool:
        return self.sound_countdown > 0

    def render(self, fb: np.ndarray) -> None:
        render_game(fb, self)

    # Serialization ---------------------------------------------------------

    def serialize(self) -> bytes:
        out = bytearray()
        out += struct.pack(
            ">BHIIBB", self.spec.level_id if self.spec else 0,
            self.time_limit_s, self.score, self.clock_frames,
            self.status, self.moving,
        )
        out += struct.pack(
            ">hhBBhhhhB", self.x, self.y, self.orientation, self.keys_remaining,
            self.move_from[0], self.move_from[1], self.move_to[0], self.move_to[1],
            self.pending_orientation,
        )
        kinds = ["", "rotate", "forward", "jump", "fall"]
        out += struct.pack(
            ">BHHB", kinds.index(self.move_kind), self.anim_remaining,
            self.anim_total, _OBJ_CODE.get(self.pending_collect, 0),
        )
        mask = 0
        for b in self.last_scanned:
            mask |= 1 << b
        out += struct.pack(">HHI", mask, self.sound_countdown, self.anim_tick)
        out += struct.pack(">H", len(self.objects))
        for (x, y), kind in sorted(self.objects.items()):
            out += struct.pack(">hhB", x, y, _OBJ_CODE[kind])
        return bytes(out)

    def restore(self, blob: bytes) -> None:
        off = 0
        level_id, self.time_limit_s, self.score, self.clock_frames, \
            self.status, self.moving = struct.unpack_from(">BHIIBB", blob, off)
        off += 13
        self.x, self.y, self.orientation, self.keys_remaining, fx, fy, tx, ty, \
            self.pending_orientation = struct.unpack_from(">hhBBhhhhB", blob, off)
        off += 15
        self.move_from, self.move_to = (fx, fy), (tx, ty)
        kind_idx, self.anim_remaining, self.anim_total, collect_code = \
            struct.unpack_from(">BHHB", blob, off)
        off += 6
        kinds = ["", "rotate", "forward", "jump", "fall"]
        self.move_kind = kinds[kind_idx]
        self.pending_collect = _CODE_OBJ.get(collect_code)
        mask, self.sound_countdown, self.anim_tick = struct.unpack_from(">HHI", blob, off)
        off += 8
        self.last_scanned = frozenset(b for b in range(14) if mask & (1 << b))
        (n_obj,) = struct.unpack_from(">H", blob, off)
        off += 2
        self.objects = {}
        for _ in range(n_obj):
            x, y, code = struct.unpack_from(">hhB", blob, off)
            off += 5
            self.objects[(x, y)] = _CODE_OBJ[code]
        self.spec = None
        if level_id:
            self.spec = self._find_spec(f"level{level_id}")
