"""Deterministic actor-critic with target networks and soft updates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..neural import Adam, Identity, Linear, Module, ReLU, Sigmoid, Tanh
from .replay import ReplayBuffer

_OUTPUTS = {"tanh": Tanh, "sigmoid": Sigmoid, "linear": Identity}


class Mlp(Module):
    def __init__(self, d_in: int, hidden, d_out: int, rng: np.random.Generator,
                 output: str = "linear"):
        super().__init__()
        if output not in _OUTPUTS:
            raise ValueError(f"unknown output activation {output!r}")
        self.dims = (d_in, tuple(hidden), d_out)
        self.output = output
        self.layers = []
        for i, h in enumerate(hidden):
            self.layers.append(self.add_child(f"fc{i}", Linear(d_in, h, rng)))
            self.layers.append(ReLU())
            d_in = h
        self.layers.append(self.add_child("out", Linear(d_in, d_out, rng)))
        self.layers.append(_OUTPUTS[output]())

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class Critic(Module):
    """Q(s, a) as an MLP over the concatenated state and action."""

    def __init__(self, state_dim: int, action_dim: int, hidden, rng: np.random.Generator):
        super().__init__()
        self.state_dim = state_dim
        self.net = self.add_child("net", Mlp(state_dim + action_dim, hidden, 1, rng))

    def forward(self, s, a):
        return self.net.forward(np.concatenate([s, a], axis=-1))[..., 0]

    def backward(self, dq):
        """Returns d/d(action); parameter gradients accumulate as usual."""
        dx = self.net.backward(np.asarray(dq)[..., None])
        return dx[..., self.state_dim:]


@dataclass(frozen=True)
class DdpgConfig:
    hidden: tuple = (64, 64)
    lr_actor: float = 1e-4
    lr_critic: float = 1e-4
    gamma: float = 0.99
    tau: float = 0.001
    batch: int = 64
    reward_scale: float = 1.0  # applied to stored rewards inside the TD target only


class ActorCritic:
    def __init__(self, state_dim: int, action_dim: int, cfg: DdpgConfig, rng: np.random.Generator,
                 actor_output: str = "tanh"):
        self.cfg = cfg
        self.state_dim, self.action_dim = state_dim, action_dim
        self.actor = Mlp(state_dim, cfg.hidden, action_dim, rng, actor_output)
        self.critic = Critic(state_dim, action_dim, cfg.hidden, rng)
        self.actor_target = Mlp(state_dim, cfg.hidden, action_dim, rng, actor_output)
        self.critic_target = Critic(state_dim, action_dim, cfg.hidden, rng)
        self.actor_target.load_state_dict(self.actor.state_dict())
        self.critic_target.load_state_dict(self.critic.state_dict())
        self.actor_opt = Adam(self.actor, lr=cfg.lr_actor)
        self.critic_opt = Adam(self.critic, lr=cfg.lr_critic)

    def act(self, state) -> np.ndarray:
        return self.actor.forward(np.asarray(state, dtype=np.float64))

    def networks(self) -> dict[str, Module]:
        return {"actor": self.actor, "critic": self.critic,
                "actor_target": self.actor_target, "critic_target": self.critic_target}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {f"{k}.{n}": v for k, m in self.networks().items() for n, v in m.state_dict().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for k, m in self.networks().items():
            m.load_state_dict({n[len(k) + 1:]: v for n, v in state.items()
                               if n.startswith(k + ".")})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for m in self.networks().values()
                   for _, p, _ in m.named_parameters())


def soft_update(target: Module, live: Module, tau: float):
    """target <- tau * live + (1 - tau) * target."""
    for (_, pt, _), (_, pl, _) in zip(target.named_parameters(), live.named_parameters()):
        pt *= 1.0 - tau
        pt += tau * pl


@dataclass(frozen=True)
class UpdateInfo:
    updated: bool
    critic_loss: float = float("nan")
    q_mean: float = float("nan")


def ddpg_update(buffer: ReplayBuffer, ac: ActorCritic, rng: np.random.Generator,
                batch: int | None = None) -> UpdateInfo:
    """One critic step on the TD error, one actor step up the critic, then soft target updates.

    Returns ``UpdateInfo(updated=False)`` without touching anything when the
    buffer holds fewer than ``batch`` transitions.
    """
    cfg = ac.cfg
    B = cfg.batch if batch is None else batch
    if len(buffer) < B:
        return UpdateInfo(False)
    s, a, r, s2, done = buffer.sample(B, rng)
    q_next = ac.critic_target.forward(s2, ac.actor_target.forward(s2))
    y = cfg.reward_scale * r + cfg.gamma * (1.0 - done) * q_next

    ac.critic.zero_grad()
    q = ac.critic.forward(s, a)
    diff = q - y
    ac.critic.backward(2.0 * diff / B)
    ac.critic_opt.step()

    ac.actor.zero_grad()
    a_pi = ac.actor.forward(s)
    q_pi = ac.critic.forward(s, a_pi)
    da = ac.critic.backward(-np.ones(B) / B)
    ac.actor.backward(da)
    ac.actor_opt.step()
    ac.critic.zero_grad()

    soft_update(ac.actor_target, ac.actor, cfg.tau)
    soft_update(ac.critic_target, ac.critic, cfg.tau)
    return UpdateInfo(True, float(np.mean(diff**2)), float(np.mean(q_pi)))
