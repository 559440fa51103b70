"""Two-timescale control loop: hierarchical DDPG, its flat baselines and the oracle yardstick.

Per macro-step the meta-controller reads the ViT's blockage probabilities and
UE locations and picks a serving mode per UE (1 direct, 0 RIS).  Per micro-step
(one TTI) the sub-controller reads estimated effective channels and sets the
beamformer and RIS phases.  Rewards are always computed on true channels.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import ExperimentConfig, config_hash
from ..estimators.phase1 import Phase1Models, world_params
from ..neural import save_checkpoint
from ..rng import substream
from ..scenario import occluded_ues, random_world, render_frames, step_world
from .ddpg import ActorCritic, DdpgConfig, ddpg_update
from .env import LinkSystem, SubAction, decode_sub_action, env_step, oracle_step, qos_penalty
from .noise import OuNoise
from .record import RunRecord
from .replay import ReplayBuffer

log = logging.getLogger(__name__)

KINDS = ("hdrl_ris", "hdrl_no_ris", "drl_ris", "drl_no_ris", "oracle")


class TrainingAborted(RuntimeError):
    """A network or reward went non-finite; checkpoints were dumped if a directory was given."""


def meta_act(ac: ActorCritic, state, noise: OuNoise | None = None, explore: bool = False):
    """Subgoal bits and the continuous vector the meta-critic sees.

    Sigmoid outputs plus (optional) OU noise, clipped to [0, 1], then
    thresholded: strictly above 0.5 selects the direct link, so a tie goes to 0.
    """
    c = ac.act(state)
    if explore and noise is not None:
        c = np.clip(c + noise(), 0.0, 1.0)
    return (c > 0.5).astype(np.int8), c


def sub_act(ac: ActorCritic, state, N: int, K: int, M: int, p_max: float,
            noise: OuNoise | None = None, explore: bool = False):
    """Feasible (W, phases) plus the raw [-1, 1] action stored for learning."""
    a = ac.act(state)
    if explore and noise is not None:
        a = np.clip(a + noise(), -1.0, 1.0)
    return decode_sub_action(a[:2 * N * K + M] if a.shape[0] > 2 * N * K else a,
                             N, K, M, p_max), a


def meta_reward(rewards, gamma_l: float) -> float:
    """sum_{tau=0}^{n-1} gamma_l^tau r_tau."""
    r = np.asarray(rewards, dtype=np.float64)
    return float(np.sum(gamma_l ** np.arange(r.size) * r))


@dataclass(frozen=True)
class StateCoder:
    """Fixed standardization of agent inputs, computed once per configuration."""

    direct_scale: float
    cascade_scale: float
    location_scale: float

    @classmethod
    def for_system(cls, system: LinkSystem, cfg: ExperimentConfig, seed: int) -> "StateCoder":
        rng = substream(seed, "state-scale")
        lo, hi = np.asarray(cfg.scenario.ue_lo), np.asarray(cfg.scenario.ue_hi)
        pos = lo + rng.random((64, 3)) * (hi - lo)
        ch = system.channels(pos)
        direct = np.mean(np.abs(ch.h_bd) ** 2)
        cascade = np.mean(np.abs(ch.h_rd.conj() @ ch.G) ** 2)
        return cls(1.0 / np.sqrt(direct), 1.0 / np.sqrt(cascade),
                   float(np.max(np.abs(np.concatenate([lo, hi])))))

    @staticmethod
    def interleave(h: np.ndarray) -> np.ndarray:
        out = np.empty(2 * h.size)
        out[0::2] = h.real.ravel()
        out[1::2] = h.imag.ravel()
        return out

    def channel_block(self, h_eff_hat: np.ndarray, modes) -> np.ndarray:
        scale = np.where(np.asarray(modes) == 1, self.direct_scale, self.cascade_scale)
        return self.interleave(h_eff_hat * scale[:, None])

    def meta_state(self, p_hat, ue_pos) -> np.ndarray:
        return np.concatenate([p_hat, np.ravel(ue_pos) / self.location_scale])


def estimated_effective(models: Phase1Models, system: LinkSystem, ue_pos, modes,
                        phases) -> np.ndarray:
    """(K, N) estimated serving channels; RIS-mode rows use the given phases."""
    h_bd = models.bs.estimate(ue_pos)
    modes = np.asarray(modes)
    if np.all(modes == 1):
        return h_bd
    h_rd = models.ris.estimate(ue_pos)
    cascade = (np.exp(-1j * phases)[:, None] * h_rd.T).T @ system.G.conj()
    return np.where(modes[:, None] == 1, h_bd, cascade)


@dataclass
class AgentRun:
    record: RunRecord
    meta: ActorCritic | None
    sub: ActorCritic | None


def _dump(out_dir, agents: dict):
    if out_dir is None:
        return
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    for name, ac in agents.items():
        if ac is not None:
            save_checkpoint(d / f"abort_{name}.nfck", ac.state_dict())


def run_agent(kind: str, cfg: ExperimentConfig, system: LinkSystem,
              models: Phase1Models | None, seed: int, *, train: bool = True,
              abort_dir=None) -> AgentRun:
    """Run ``cfg.training.episodes`` episodes of one controller family, learning if ``train``.

    ``models`` may be None for the oracle, which reads true channels and occlusion.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    t0 = time.perf_counter()
    tr, ag, sc = cfg.training, cfg.agent, cfg.scenario
    N, M, K = system.N, system.M, cfg.system.n_ues
    hierarchical = kind.startswith("hdrl")
    use_ris = kind.endswith("_ris") and not kind.endswith("no_ris")
    record = RunRecord(config_hash(cfg), seed, kind, K)
    coder = StateCoder.for_system(system, cfg, seed)
    prm = world_params(cfg)

    world_rng = substream(seed, "world")
    init_rng = substream(seed, "init-agent")
    explore_rng = substream(seed, "exploration")
    replay_rng = substream(seed, "replay")

    def ddpg_cfg(gamma):
        return DdpgConfig(hidden=tuple(ag.hidden), lr_actor=tr.agent_lr, lr_critic=tr.agent_lr,
                          gamma=gamma, tau=tr.tau, batch=tr.hdrl_batch,
                          reward_scale=ag.reward_scale)

    meta = sub = None
    meta_buf = sub_buf = None
    if kind != "oracle":
        n_w = 2 * N * K
        if hierarchical:
            sub_state_dim = n_w + K
            sub_action_dim = n_w + (M if use_ris else 0)
        else:
            sub_state_dim = n_w + 4 * K
            sub_action_dim = n_w + ((M + K) if use_ris else 0)
        sub = ActorCritic(sub_state_dim, sub_action_dim, ddpg_cfg(tr.gamma_l), init_rng, "tanh")
        sub_buf = ReplayBuffer(tr.buffer_sub, sub_state_dim, sub_action_dim)
        sub_noise = OuNoise(sub_action_dim, explore_rng, ag.ou_theta, ag.ou_sigma)
        if hierarchical and use_ris:
            meta = ActorCritic(4 * K, K, ddpg_cfg(tr.gamma_h), init_rng, "sigmoid")
            meta_buf = ReplayBuffer(tr.buffer_meta, 4 * K, K)
            meta_noise = OuNoise(K, explore_rng, ag.ou_theta, ag.ou_sigma)

    def check_finite(*values):
        ok = all(np.all(np.isfinite(v)) for v in values)
        ok = ok and all(a.is_finite() for a in (meta, sub) if a is not None)
        if not ok:
            _dump(abort_dir, {"meta": meta, "sub": sub})
            raise TrainingAborted(f"{kind}: non-finite value at step {len(record.micro)}")

    step = 0
    for ep in range(tr.episodes):
        world = random_world(world_rng, K, prm)
        if sub is not None:
            sub_noise.reset()
        if meta is not None:
            meta_noise.reset()
        phases = np.zeros(M)
        modes = np.ones(K, dtype=np.int8)
        pending_meta = None
        for t in range(tr.t_macro):
            if kind == "oracle":
                p_hat = np.empty(0)  # the oracle sees true occlusion, not predictions
            else:
                frames = render_frames(world, sc.frames, sc.frame_height, sc.frame_width,
                                       1.0 / sc.camera_fps)
                p_hat = models.vit.forward(frames)
            s_meta = coder.meta_state(p_hat, world.ue_pos)
            if pending_meta is not None:
                meta_buf.add(*pending_meta, s_meta, False)
            cont = None
            if meta is not None:
                modes, cont = meta_act(meta, s_meta, meta_noise, explore=train)
            elif hierarchical or not use_ris:
                modes = np.ones(K, dtype=np.int8)
            rewards = []
            pending = None
            first_modes = modes.copy()
            for tau in range(tr.n_macro):
                ch = system.channels(world.ue_pos)
                blocked = occluded_ues(world)
                if kind == "oracle":
                    o = oracle_step(system, ch, blocked)
                    action, modes = o.action, o.modes
                    r = o.report.sum_se - qos_penalty(o.report.se, system.se_min, ag.qos_penalty)
                    report = o.report
                else:
                    h_hat = estimated_effective(models, system, world.ue_pos, modes, phases)
                    block = coder.channel_block(h_hat, modes)
                    if hierarchical:
                        s = np.concatenate([block, modes.astype(np.float64)])
                    else:
                        s = np.concatenate([block, coder.meta_state(p_hat, world.ue_pos)])
                    if pending is not None:
                        sub_buf.add(*pending, s, False)
                    a = sub.act(s)
                    if train:
                        a = np.clip(a + sub_noise(), -1.0, 1.0)
                    n_w = 2 * N * K
                    if not hierarchical and use_ris:
                        modes = (a[n_w + M:] > 0.0).astype(np.int8)
                        action = decode_sub_action(a[:n_w + M], N, K, M, system.p_max)
                    else:
                        action = decode_sub_action(a, N, K, M, system.p_max)
                    r, report = env_step(system, ch, blocked, action, modes, ag.qos_penalty)
                    check_finite(r, a)
                    last = tau == tr.n_macro - 1 and (hierarchical or t == tr.t_macro - 1)
                    if last:
                        sub_buf.add(s, a, r, s, True)
                        pending = None
                    else:
                        pending = (s, a, r)
                    if train and tau % tr.update_every == 0:
                        ddpg_update(sub_buf, sub, replay_rng)
                        check_finite()
                phases = action.phases
                rewards.append(r)
                record.log_micro(
                    episode=ep, macro=t, micro=tau, step=step, reward=float(r),
                    sum_se=report.sum_se,
                    qos_penalty=qos_penalty(report.se, system.se_min, ag.qos_penalty),
                    min_slack=float(np.min(report.slack)),
                    power=float(np.sum(np.abs(action.W) ** 2)), power_limit=system.p_max,
                    max_modulus_error=float(np.max(np.abs(np.abs(np.exp(1j * action.phases))
                                                          - 1.0))),
                    se=report.se.tolist(), slack=report.slack.tolist())
                world = step_world(world, tr.tti_ms / 1000.0)
                step += 1
            R = meta_reward(rewards, tr.gamma_l)
            record.log_macro(episode=ep, macro=t, subgoal=first_modes.tolist(),
                             predicted_blockage=p_hat.tolist(), meta_reward=R)
            if meta is not None:
                if t == tr.t_macro - 1:
                    meta_buf.add(s_meta, cont, R, s_meta, True)
                    pending_meta = None
                else:
                    pending_meta = (s_meta, cont, R)
                if train:
                    ddpg_update(meta_buf, meta, replay_rng)
                    check_finite()
        log.debug("%s episode %d mean sum SE %.3f", kind, ep,
                  np.mean([m["sum_se"] for m in record.micro[-tr.t_macro * tr.n_macro:]]))
    record.wall_time_s = time.perf_counter() - t0
    return AgentRun(record, meta, sub)


def train_hdrl(cfg: ExperimentConfig, system: LinkSystem, models: Phase1Models, seed: int,
               abort_dir=None) -> AgentRun:
    return run_agent("hdrl_ris", cfg, system, models, seed, abort_dir=abort_dir)


def run_baseline(kind: str, cfg: ExperimentConfig, system: LinkSystem,
                 models: Phase1Models | None, seed: int) -> AgentRun:
    return run_agent(kind, cfg, system, models, seed)
