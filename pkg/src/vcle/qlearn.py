"""Tabular Q-learning over the discrete RAM pose, for desk-scale training.

The state key is (level, x, y, orientation, keys_remaining), read straight
from console RAM, so learning is verifiable in minutes without any function
approximation. Epsilon decays linearly from 1.0 to 0.05 over the first half
of the episode budget.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .envs import KulaEnv

N_ACTIONS = 4


@dataclass
class QAgentConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    max_moves: int = 400


class QTable:
    def __init__(self):
        self._q: dict[tuple, np.ndarray] = {}

    def values(self, state: tuple) -> np.ndarray:
        if state not in self._q:
            self._q[state] = np.zeros(N_ACTIONS)
        return self._q[state]

    def best_action(self, state: tuple) -> int:
        return int(np.argmax(self.values(state)))

    def to_bytes(self) -> bytes:
        """Deterministic serialization: sorted keys, repr-exact floats."""
        table = {
            ",".join(map(str, key)): [repr(float(v)) for v in vals]
            for key, vals in sorted(self._q.items())
        }
        return json.dumps(table, sort_keys=True, indent=0).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "QTable":
        table = cls()
        for key, vals in json.loads(data.decode("utf-8")).items():
            state = tuple(int(p) for p in key.split(","))
            table._q[state] = np.array([float(v) for v in vals])
        return table


def epsilon_at(episode: int, total_episodes: int, cfg: QAgentConfig) -> float:
    half = max(1, total_episodes // 2)
    if episode >= half:
        return cfg.epsilon_end
    frac = episode / half
    return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac


def train(
    env: KulaEnv,
    episodes: int,
    cfg: QAgentConfig | None = None,
    seed: int | None = None,
    on_episode=None,
) -> QTable:
    """Run Q-learning; calls ``on_episode(index, total_reward, moves, cause)``."""
    cfg = cfg or QAgentConfig()
    rng = np.random.default_rng(seed)
    table = QTable()

    env.reset(seed=seed)
    for episode in range(episodes):
        if episode > 0:
            env.reset()
        state = env.pose_key()
        eps = epsilon_at(episode, episodes, cfg)
        total = 0.0
        moves = 0
        cause = "playing"
        while moves < cfg.max_moves:
            if rng.random() < eps:
                action = int(rng.integers(N_ACTIONS))
            else:
                action = table.best_action(state)
            result = env.step(action)
            total += result.reward
            moves += 1
            next_state = env.pose_key()
            q = table.values(state)
            if result.done:
                target = result.reward
            else:
                target = result.reward + cfg.gamma * float(
                    np.max(table.values(next_state))
                )
            q[action] += cfg.alpha * (target - q[action])
            state = next_state
            if result.done:
                cause = result.info["cause"]
                break
        if on_episode is not None:
            on_episode(episode, total, moves, cause)
    return table


def run_greedy(env: KulaEnv, table: QTable, max_moves: int = 400) -> tuple[float, int, str]:
    """Play one episode greedily from the learned table."""
    env.reset()
    total = 0.0
    moves = 0
    cause = "playing"
    while moves < max_moves:
        result = env.step(table.best_action(env.pose_key()))
        total += result.reward
        moves += 1
        if result.done:
            cause = result.info["cause"]
            break
    return total, moves, cause
