"""Gym-style episode interface over the game abstraction.

Three variants share one API:

* ``fixed-v1``   one level, one fixed start, visual state encoding.
* ``random-v1``  every reset draws uniformly from the twelve training
  starts (three levels, four starts each) with an 80 second clock; eval
  mode plays the single reserved validation start instead.
* ``audio-v1``   fixed start policy with the composite encoding
  (visual, sound as MFCCs, clock, score) and audio recording on.

Mid-episode situations can be checkpointed with ``save_visited`` and
re-entered later with ``resume_from``, which restores the console
snapshot together with the episode bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .dsp import mfcc
from .errors import BadAction, EpisodeOver, UnknownState, VcleError
from .kula import levels as lv
from .kula.cartridge import STATUS_NAMES
from .moves import Action, AudioPolicy, Game, RewardConfig
from .visual import process_frame

VARIANTS = ("fixed-v1", "random-v1", "audio-v1")

RANDOM_V1_TIME_S = 80


class CompositeState(NamedTuple):
    visual: np.ndarray
    sound: np.ndarray | None
    clock: float
    score: int


@dataclass
class StepResult:
    state: object
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


class StateKey(NamedTuple):
    key_id: str


_PLAYER_GLYPHS = "^>v<"
_TILE_GLYPHS = {lv.VOID: ".", lv.PLATFORM: "#", lv.GOAL: "G", lv.SPIKE: "S"}
_OBJECT_GLYPHS = {"coin": "C", "key": "K", "fruit": "F"}


class KulaEnv:
    """One environment instance per console session; not reentrant."""

    def __init__(
        self,
        variant: str = "fixed-v1",
        level: int | None = None,
        eval_mode: bool = False,
        reward: RewardConfig | None = None,
        audio: AudioPolicy | None = None,
        fast: bool = True,
        capture_visual: bool = True,
        level_specs: list[lv.LevelSpec] | None = None,
        persist_dir=None,
    ):
        if variant not in VARIANTS:
            raise VcleError(f"unknown variant {variant!r}")
        self.variant = variant
        self.eval_mode = eval_mode
        if variant == "audio-v1":
            audio = audio or AudioPolicy(record=True, use_mfcc=True)
            if not audio.record:
                audio.record = True
        self._audio = audio or AudioPolicy()
        self._reward = reward or RewardConfig()

        self._specs = level_specs if level_specs is not None else lv.bundled_levels()
        self._fixed_level = level if level is not None else self._specs[0].level_id
        self.game = Game(
            reward=self._reward,
            audio=self._audio,
            capture_visual=capture_visual,
            fast=fast,
            persist_dir=persist_dir,
            cartridge_kwargs={"level_specs": self._specs},
        )
        self._rng = np.random.default_rng()
        self._start_pool = [
            (spec.level_id, idx)
            for spec in self._specs
            for idx in range(len(spec.starts))
        ]
        self._reserved = next(
            (spec.level_id for spec in self._specs if spec.reserved_start), None
        )

        self._episode_active = False
        self._done = True
        self._moves = 0
        self._total_reward = 0.0
        self._objects: dict[tuple[int, int], str] = {}
        self._spec: lv.LevelSpec | None = None
        self._level_token = ""
        self._last_start = -1
        self._save_counter = 0
        self._saved: dict[str, tuple] = {}

    # Episode control ----------------------------------------------------

    def _pick_start(self) -> tuple[str, int]:
        if self.variant == "random-v1":
            if self.eval_mode:
                if self._reserved is None:
                    raise VcleError("no reserved start available")
                return f"level{self._reserved}:r@{RANDOM_V1_TIME_S}", -1
            level_id, idx = self._start_pool[
                int(self._rng.integers(len(self._start_pool)))
            ]
            return f"level{level_id}:{idx}@{RANDOM_V1_TIME_S}", idx
        return f"level{self._fixed_level}:0", 0

    def reset(self, seed: int | None = None):
        """Start a new episode; returns the initial encoded state."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        token, start_idx = self._pick_start()
        state = self.game.play(token)
        self._spec = next(s for s in self._specs if s.level_id == state.level_id)
        self._objects = dict(self._spec.objects)
        self._level_token = token
        self._last_start = start_idx
        self._episode_active = True
        self._done = False
        self._moves = 0
        self._total_reward = 0.0
        return self._encode_initial(state)

    def step(self, action) -> StepResult:
        if not self._episode_active:
            raise EpisodeOver("reset the environment first")
        if self._done:
            raise EpisodeOver("episode finished")
        try:
            act = Action(int(action))
        except (ValueError, TypeError):
            raise BadAction(repr(action)) from None

        outcome = self.game.move(act)
        after = self.game.read_state()
        # Collections resolve at the landing cell; popping an empty cell
        # is a harmless no-op.
        self._objects.pop((after.x, after.y), None)

        self._moves += 1
        self._total_reward += outcome.reward
        self._done = not outcome.playing
        info = {
            "duration_real": outcome.duration_real,
            "duration_game": outcome.duration_game,
            "score": outcome.score,
            "clock": outcome.clock,
            "cause": None if outcome.playing else STATUS_NAMES[after.status],
            "moves": self._moves,
            "level": after.level_id,
            "x": after.x,
            "y": after.y,
            "orientation": after.orientation,
            "keys_remaining": after.keys_remaining,
        }
        return StepResult(self._encode_outcome(outcome), outcome.reward, self._done, info)

    def close(self) -> None:
        self.game.close()
        self._episode_active = False

    # Encoding ------------------------------------------------------------

    def _empty_sound(self):
        if not self._audio.record:
            return None
        if self._audio.use_mfcc:
            return mfcc(np.zeros(0, dtype=np.int16))
        return np.zeros(0, dtype=np.int16)

    def _capture_visual(self):
        if not self.game.capture_visual:
            return None
        return process_frame(self.game.client.get_screen())

    def _encode_initial(self, state):
        visual = self._capture_visual()
        if self.variant == "audio-v1":
            return CompositeState(
                visual, self._empty_sound(), state.clock_frames / 60.0, state.score
            )
        if self._reward.time_in_state:
            return CompositeState(visual, None, state.clock_frames / 60.0, state.score)
        return visual

    def _encode_outcome(self, outcome):
        if self.variant == "audio-v1":
            return CompositeState(outcome.visual, outcome.sound, outcome.clock, outcome.score)
        if self._reward.time_in_state:
            return CompositeState(outcome.visual, None, outcome.clock, outcome.score)
        return outcome.visual

    # Spaces ---------------------------------------------------------------

    def action_space(self) -> dict:
        return {"type": "discrete", "n": 4}

    def observation_space(self) -> dict:
        box = {
            "type": "box",
            "shape": [84, 84, 3],
            "dtype": "uint8",
            "low": 0,
            "high": 255,
        }
        if self.variant == "audio-v1" or self._reward.time_in_state:
            return {
                "type": "dict",
                "spaces": {
                    "visual": box,
                    "sound": {"type": "box", "shape": [-1, 13], "dtype": "float64"},
                    "clock": {"type": "box", "shape": [], "dtype": "float64"},
                    "score": {"type": "box", "shape": [], "dtype": "int64"},
                },
            }
        return box

    # Rendering ------------------------------------------------------------

    def render(self, mode: str = "text", path=None):
        if not self._episode_active:
            raise EpisodeOver("reset the environment first")
        if mode == "text":
            return self._render_text()
        if mode == "image-file":
            return self._render_image(path)
        raise VcleError(f"unknown render mode {mode!r}")

    def _render_text(self) -> str:
        state = self.game.read_state()
        rows = []
        for y in range(self._spec.height):
            row = []
            for x in range(self._spec.width):
                if (x, y) == (state.x, state.y):
                    row.append(_PLAYER_GLYPHS[state.orientation])
                elif (x, y) in self._objects:
                    row.append(_OBJECT_GLYPHS[self._objects[(x, y)]])
                else:
                    row.append(_TILE_GLYPHS[self._spec.tile(x, y)])
            rows.append("".join(row))
        hud = (
            f"level {state.level_id}  score {state.score}  "
            f"clock {state.clock_frames / 60.0:.1f}  keys {state.keys_remaining}  "
            f"status {STATUS_NAMES[state.status]}"
        )
        return "\n".join(rows + [hud])

    def _render_image(self, path) -> str:
        if path is None:
            raise VcleError("image-file render needs a path")
        screen = self.game.client.get_screen()
        out = Path(path)
        try:
            with open(out, "wb") as f:
                f.write(b"P6 320 240 255\n")
                f.write(screen.tobytes())
        except OSError as exc:
            raise VcleError(f"render write failed: {exc}") from exc
        return str(out)

    # State replay -----------------------------------------------------------

    def save_visited(self) -> StateKey:
        """Checkpoint the current mid-episode situation."""
        if not self._episode_active or self._done:
            raise EpisodeOver("no active episode to save")
        name = f"visited-{self._save_counter}"
        self._save_counter += 1
        self.game.client.save_state(name)
        self._saved[name] = (
            dict(self._objects),
            self._moves,
            self._total_reward,
            self._level_token,
            self._spec,
        )
        return StateKey(name)

    def resume_from(self, key: StateKey):
        """Restore a previously saved situation and continue the episode."""
        name = key.key_id if isinstance(key, StateKey) else str(key)
        if name not in self._saved:
            raise UnknownState(name)
        self.game.client.load_state(name)
        objects, moves, total, token, spec = self._saved[name]
        self._objects = dict(objects)
        self._moves = moves
        self._total_reward = total
        self._level_token = token
        self._spec = spec
        self._episode_active = True
        self._done = False
        state = self.game.refresh()
        return self._encode_initial(state)

    # Introspection ------------------------------------------------------------

    @property
    def total_reward(self) -> float:
        return self._total_reward

    @property
    def moves(self) -> int:
        return self._moves

    @property
    def done(self) -> bool:
        return self._done

    @property
    def last_start(self) -> int:
        return self._last_start

    def pose_key(self):
        return self.game.pose_key()


def make_env(variant: str, config_path=None, **kwargs) -> KulaEnv:
    """Environment factory: variant name plus an optional config file."""
    if config_path is not None:
        from .config import audio_policy_from, parse_config_file, reward_config_from

        values = parse_config_file(config_path)
        kwargs.setdefault("reward", reward_config_from(values))
        kwargs.setdefault("audio", audio_policy_from(values))
        if "capture_visual" in values:
            kwargs.setdefault("capture_visual", values["capture_visual"].lower() in ("true", "yes", "1"))
    return KulaEnv(variant, **kwargs)
