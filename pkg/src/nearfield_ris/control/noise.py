"""Ornstein-Uhlenbeck exploration noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OuNoiseState:
    x: np.ndarray
    theta: float = 0.15
    sigma: float = 0.3


def ou_sample(state: OuNoiseState, dt: float, rng: np.random.Generator):
    """One Euler-Maruyama step of dx = -theta x dt + sigma dW; returns (noise, new state)."""
    x = state.x + state.theta * (0.0 - state.x) * dt \
        + state.sigma * np.sqrt(dt) * rng.standard_normal(state.x.shape)
    new = OuNoiseState(x, state.theta, state.sigma)
    return x.copy(), new


class OuNoise:
    """Stateful wrapper around ``ou_sample`` bound to one generator."""

    def __init__(self, dim: int, rng: np.random.Generator, theta: float = 0.15,
                 sigma: float = 0.3, dt: float = 1.0):
        self.rng = rng
        self.dt = dt
        self.state = OuNoiseState(np.zeros(dim), theta, sigma)

    def reset(self):
        self.state = OuNoiseState(np.zeros_like(self.state.x), self.state.theta, self.state.sigma)

    def __call__(self) -> np.ndarray:
        x, self.state = ou_sample(self.state, self.dt, self.rng)
        return x

    @property
    def stationary_variance(self) -> float:
        return self.state.sigma**2 / (2.0 * self.state.theta)
