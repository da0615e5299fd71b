"""Action-level game abstraction over the console client.

``Game.move`` translates an action into control events, lets the console
run, and delimits the transition asynchronously: the move is over when the
cartridge's moving flag falls back to zero (or the status turns terminal),
observed through memory listeners rather than by counting frames. The
returned ``MoveOutcome`` carries the processed screen, the reward, both
durations, the remaining clock, the episode score and (optionally) the
move's sound.
"""

from __future__ import annotations

import struct
import threading
import time
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .buttons import Button
from .client import ConsoleClient
from .dsp import mfcc
from .errors import EpisodeOver, StuckMove
from .kula.cartridge import (
    OFF_AUDIO,
    OFF_MOVING,
    OFF_STATUS,
    PLAYING,
    RAM_BASE,
    RAM_MAP_LEN,
    STATUS_NAMES,
)
from .visual import process_frame


class Action(IntEnum):
    FORWARD = 0
    LOOK_RIGHT = 1
    LOOK_LEFT = 2
    JUMP_FORWARD = 3


@dataclass
class RewardConfig:
    """Score-change to reward mapping plus terminal and per-move constants.

    Every move pays ``step_cost``; terminal moves return the win/lose value
    alone. Per-cause lose values default to ``lose_reward`` when unset.
    """

    score_to_reward: dict[int, float] = field(
        default_factory=lambda: {0: 0.0, 250: 0.2, 1000: 0.4, 2500: 0.6}
    )
    win_reward: float = 1.0
    lose_reward: float = -1.0
    step_cost: float = 0.01
    lose_fall: float | None = None
    lose_spike: float | None = None
    lose_timeout: float | None = None
    time_in_state: bool = False

    def lose_value(self, cause: str) -> float:
        override = {
            "fell": self.lose_fall,
            "spiked": self.lose_spike,
            "timeout": self.lose_timeout,
        }.get(cause)
        return self.lose_reward if override is None else override


@dataclass
class AudioPolicy:
    record: bool = False
    use_mfcc: bool = False
    silence_threshold: float = 0.001
    max_record_s: float = 3.0


@dataclass
class MoveOutcome:
    visual: np.ndarray | None
    reward: float
    playing: bool
    clock: float
    sound: np.ndarray | None
    duration_real: float
    duration_game: float
    score: int


def trim_silence(wave: np.ndarray, threshold: float = 0.001) -> np.ndarray:
    """Drop the maximal silent prefix and suffix; interior silence stays.

    ``threshold`` is a fraction of full scale (32768 for int16 input, 1.0
    for float input). An all-silent wave trims to an empty array.
    """
    wave = np.asarray(wave)
    full_scale = 32768.0 if wave.dtype.kind == "i" else 1.0
    loud = np.abs(wave.astype(np.float64)) > threshold * full_scale
    idx = np.nonzero(loud)[0]
    if len(idx) == 0:
        return wave[:0]
    return wave[idx[0]:idx[-1] + 1]


@dataclass
class RamState:
    score: int
    clock_frames: int
    status: int
    moving: int
    x: int
    y: int
    orientation: int
    keys_remaining: int
    level_id: int
    audio_active: int

    @classmethod
    def parse(cls, raw: bytes) -> "RamState":
        score, clock = struct.unpack_from(">II", raw)
        return cls(score, clock, *raw[8:16])


_MOVE_WALL_TIMEOUT = 30.0
_STUCK_GAME_FRAMES = 600  # 10 s of game time


class Game:
    """One playable session of the rolling-ball cartridge."""

    def __init__(
        self,
        client: ConsoleClient | None = None,
        reward: RewardConfig | None = None,
        audio: AudioPolicy | None = None,
        capture_visual: bool = True,
        **client_kwargs,
    ):
        self.reward_config = reward or RewardConfig()
        self.audio_policy = audio or AudioPolicy()
        self.capture_visual = capture_visual
        self._owns_client = client is None
        self.client = client or ConsoleClient("kula", **client_kwargs)
        self._watches_ready = False
        self._move_done = threading.Event()
        self._audio_done = threading.Event()
        self._moving_val = 0
        self._status_val = PLAYING
        self._audio_val = 0
        self._in_flight = False

    # Session -----------------------------------------------------------

    def play(self, level: str) -> RamState:
        """Load ``level<N>[:<start>][@<seconds>]`` and start the episode."""
        if not self.client.running:
            self.client.run()
        self.client.load_game(level)
        if not self._watches_ready:
            self.client.add_memory_listener(RAM_BASE + OFF_MOVING, 1, self._on_moving)
            self.client.add_memory_listener(RAM_BASE + OFF_STATUS, 1, self._on_status)
            self.client.add_memory_listener(RAM_BASE + OFF_AUDIO, 1, self._on_audio)
            self._watches_ready = True
        state = self.read_state()
        self._status_val = state.status
        self._moving_val = state.moving
        self._audio_val = state.audio_active
        return state

    def close(self) -> None:
        if self._owns_client and self.client.running:
            self.client.kill()

    def read_state(self) -> RamState:
        return RamState.parse(self.client.read_bytes(RAM_BASE, RAM_MAP_LEN))

    def refresh(self) -> RamState:
        """Resynchronize cached flags after an external state load."""
        self.client.sync_notifications()
        state = self.read_state()
        self._status_val = state.status
        self._moving_val = state.moving
        self._audio_val = state.audio_active
        return state

    @property
    def playing(self) -> bool:
        return self._status_val == PLAYING

    def interpret_state(self) -> str:
        return STATUS_NAMES[self._status_val]

    # Listener callbacks (notification thread; must not block) -----------

    def _on_moving(self, addr, length, data) -> None:
        self._moving_val = data[0]
        if data[0] == 0:
            self._move_done.set()

    def _on_status(self, addr, length, data) -> None:
        self._status_val = data[0]
        if data[0] != PLAYING:
            self._move_done.set()

    def _on_audio(self, addr, length, data) -> None:
        self._audio_val = data[0]
        if data[0] == 0:
            self._audio_done.set()

    # Moves ----------------------------------------------------------------

    def move_options(self) -> list[Action]:
        if not self.playing:
            raise EpisodeOver(self.interpret_state())
        return [Action.FORWARD, Action.LOOK_RIGHT, Action.LOOK_LEFT, Action.JUMP_FORWARD]

    def move(self, action: Action) -> MoveOutcome:
        if self._in_flight:
            raise StuckMove("move already in flight")
        if not self.playing:
            raise EpisodeOver(self.interpret_state())

        self._in_flight = True
        try:
            return self._move(Action(action))
        finally:
            self._in_flight = False

    def _move(self, action: Action) -> MoveOutcome:
        policy = self.audio_policy
        before = self.read_state()
        if before.status != PLAYING:
            raise EpisodeOver(STATUS_NAMES[before.status])

        # Fence: deliver every notification from previous moves before
        # arming the completion events, so a late callback cannot satisfy
        # this move's wait.
        self.client.sync_notifications()
        self._move_done.clear()
        self._audio_done.clear()
        wall_start = time.monotonic()
        if policy.record:
            self.client.start_recording_audio()

        if action == Action.FORWARD:
            self.client.touch_button(Button.UP)
        elif action == Action.LOOK_LEFT:
            self.client.touch_button(Button.LEFT)
        elif action == Action.LOOK_RIGHT:
            self.client.touch_button(Button.RIGHT)
        else:
            self.client.press_chord([Button.CROSS, Button.UP])

        self._wait_move_end(before)

        wave = None
        if policy.record:
            self._drain_audio_tail()
            wave = self.client.stop_recording_audio()

        after = self.read_state()
        self._status_val = after.status
        visual = process_frame(self.client.get_screen()) if self.capture_visual else None
        wall = time.monotonic() - wall_start

        reward = self._reward_for(before, after)
        sound = None
        if policy.record:
            trimmed = trim_silence(wave, policy.silence_threshold)
            sound = mfcc(trimmed) if policy.use_mfcc else trimmed

        return MoveOutcome(
            visual=visual,
            reward=reward,
            playing=after.status == PLAYING,
            clock=after.clock_frames / 60.0,
            sound=sound,
            duration_real=wall,
            duration_game=(before.clock_frames - after.clock_frames) / 60.0,
            score=after.score,
        )

    def _drain_audio_tail(self) -> None:
        """Let a sound that outlives the move finish before capture stops.

        Synchronous header reads are the source of truth; the audio-watch
        event only serves as a wakeup hint between reads.
        """
        deadline = time.monotonic() + self.audio_policy.max_record_s + 2.0
        while time.monotonic() < deadline:
            if not self.read_state().audio_active:
                return
            self._audio_done.clear()
            self._audio_done.wait(timeout=0.05)

    def _wait_move_end(self, before: RamState) -> None:
        deadline = time.monotonic() + _MOVE_WALL_TIMEOUT
        while not self._move_done.wait(timeout=0.25):
            now = self.read_state()
            stuck_game_time = (
                now.status == PLAYING
                and now.moving == 1
                and before.clock_frames - now.clock_frames > _STUCK_GAME_FRAMES
            )
            if stuck_game_time or time.monotonic() > deadline:
                raise StuckMove("completion condition never fired")

    def _reward_for(self, before: RamState, after: RamState) -> float:
        cfg = self.reward_config
        if after.status != PLAYING:
            if after.status == 1:
                return cfg.win_reward
            return cfg.lose_value(STATUS_NAMES[after.status])
        delta = after.score - before.score
        return cfg.score_to_reward.get(delta, 0.0) - cfg.step_cost

    def pose_key(self) -> tuple[int, int, int, int, int]:
        """Discrete state for tabular agents: level, x, y, orientation, keys."""
        s = self.read_state()
        return (s.level_id, s.x, s.y, s.orientation, s.keys_remaining)
