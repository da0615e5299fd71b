"""Virtual console learning environment.

A deterministic frame-stepped game console controlled over a four-channel
wire protocol, a rolling-ball puzzle cartridge, an asynchronous move-level
game abstraction with audio/visual/score state encodings, and Gym-style
episode interfaces with multi-start and state-replay support.
"""

from .buttons import Button, ControlEvent, ControlKind
from .client import ConsoleClient
from .console import VirtualConsole
from .envs import CompositeState, KulaEnv, StateKey, StepResult, make_env
from .moves import Action, AudioPolicy, Game, MoveOutcome, RewardConfig, trim_silence
from .visual import process_frame

__version__ = "0.1.0"

__all__ = [
    "Action",
    "AudioPolicy",
    "Button",
    "CompositeState",
    "ConsoleClient",
    "ControlEvent",
    "ControlKind",
    "Game",
    "KulaEnv",
    "MoveOutcome",
    "RewardConfig",
    "StateKey",
    "StepResult",
    "VirtualConsole",
    "make_env",
    "process_frame",
    "trim_silence",
]
