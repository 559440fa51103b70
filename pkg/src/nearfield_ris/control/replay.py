"""Fixed-capacity FIFO experience replay."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class Batch(NamedTuple):
    state: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    """Ring buffer over preallocated arrays; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.state = np.zeros((capacity, state_dim))
        self.action = np.zeros((capacity, action_dim))
        self.reward = np.zeros(capacity)
        self.next_state = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity)
        self.ids = np.full(capacity, -1, dtype=np.int64)  # insertion counter per slot
        self._next = 0
        self._count = 0

    def __len__(self) -> int:
        return min(self._count, self.capacity)

    def add(self, state, action, reward: float, next_state, done: bool = False):
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        i = self._next
        self.state[i] = state
        self.action[i] = action
        self.reward[i] = reward
        self.next_state[i] = next_state
        self.done[i] = float(done)
        self.ids[i] = self._count
        self._count += 1
        self._next = (i + 1) % self.capacity

    def sample(self, batch: int, rng: np.random.Generator) -> Batch:
        """Uniform draw of ``batch`` distinct stored transitions."""
        n = len(self)
        if batch > n:
            raise ValueError(f"cannot draw {batch} from {n} transitions")
        idx = rng.choice(n, size=batch, replace=False)
        return Batch(self.state[idx], self.action[idx], self.reward[idx],
                     self.next_state[idx], self.done[idx])
