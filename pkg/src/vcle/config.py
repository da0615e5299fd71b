"""Plain-text key-value configuration files.

Format: one ``key = value`` per line, ``#`` comments, blank lines ignored.
Recognized keys cover the reward mapping, the audio policy and environment
options::

    step_cost = 0.01
    win_reward = 1.0
    lose_reward = -1.0
    score_reward_250 = 0.2
    record_audio = true
    use_mfcc = true
    silence_threshold = 0.001
    max_record_s = 3.0
    time_in_state = false
    capture_visual = true
"""

from __future__ import annotations

from pathlib import Path

from .errors import ScriptError
from .moves import AudioPolicy, RewardConfig

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScriptError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _as_bool(text: str, key: str) -> bool:
    try:
        return _BOOL[text.lower()]
    except KeyError:
        raise ScriptError(f"bad boolean for {key}: {text!r}") from None


def reward_config_from(values: dict[str, str]) -> RewardConfig:
    cfg = RewardConfig()
    mapping = dict(cfg.score_to_reward)
    for key, text in values.items():
        if key.startswith("score_reward_"):
            mapping[int(key.removeprefix("score_reward_"))] = float(text)
        elif key in ("win_reward", "lose_reward", "step_cost"):
            setattr(cfg, key, float(text))
        elif key in ("lose_fall", "lose_spike", "lose_timeout"):
            setattr(cfg, key, float(text))
        elif key == "time_in_state":
            cfg.time_in_state = _as_bool(text, key)
    cfg.score_to_reward = mapping
    return cfg


def audio_policy_from(values: dict[str, str]) -> AudioPolicy:
    policy = AudioPolicy()
    if "record_audio" in values:
        policy.record = _as_bool(values["record_audio"], "record_audio")
    if "use_mfcc" in values:
        policy.use_mfcc = _as_bool(values["use_mfcc"], "use_mfcc")
    if "silence_threshold" in values:
        policy.silence_threshold = float(values["silence_threshold"])
    if "max_record_s" in values:
        policy.max_record_s = float(values["max_record_s"])
    return policy
