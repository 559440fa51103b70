"""Phase-1 model bundle: CSI estimators for the BS and RIS arrays plus the blockage ViT."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..config import ExperimentConfig
from ..geometry import ArrayGeometry, geometric_features
from ..neural import load_checkpoint, save_checkpoint
from ..rng import substream
from ..scenario import (
    Blocker,
    LabeledSample,
    WorldParams,
    WorldState,
    blockage_threshold_db,
    make_dataset,
    occluded_ues,
    random_world,
    render_frames,
    step_world,
)
from .csi import (
    CsiModelConfig,
    CsiTransformer,
    amplitude_scale,
    make_csi_dataset,
    sample_positions,
    train_csi,
)
from .vit import (
    VisionTransformer,
    VitModelConfig,
    event_lead_times,
    predict,
    split_indices,
    stack_samples,
    train_vit,
)

log = logging.getLogger(__name__)

CHECKPOINTS = ("csi_bs.nfck", "csi_ris.nfck", "vit.nfck")


def world_params(cfg: ExperimentConfig) -> WorldParams:
    sc = cfg.scenario
    return WorldParams(ue_lo=sc.ue_lo, ue_hi=sc.ue_hi, arena_lo=sc.arena_lo, arena_hi=sc.arena_hi,
                       bs_position=cfg.system.bs_position, n_blockers=sc.n_blockers,
                       blocker_half_extents=sc.blocker_half_extents,
                       blocker_speed=sc.blocker_speed, ue_speed=sc.ue_speed)


def csi_model_config(cfg: ExperimentConfig, n_tokens: int) -> CsiModelConfig:
    c = cfg.csi
    return CsiModelConfig(n_tokens=n_tokens, d_model=c.d_model, n_layers=c.n_layers,
                          heads=c.heads, d_k=c.d_k, d_v=c.d_v,
                          distance_scale=c.distance_scale_m)


def vit_model_config(cfg: ExperimentConfig) -> VitModelConfig:
    sc, v = cfg.scenario, cfg.vit
    return VitModelConfig(height=sc.frame_height, width=sc.frame_width, in_channels=sc.frames,
                          patch=v.patch, d_model=v.d_model, n_layers=v.n_layers, heads=v.heads,
                          d_k=v.d_k, d_v=v.d_v, mlp_hidden=tuple(v.mlp_hidden),
                          n_outputs=cfg.system.n_ues)


def label_threshold_db(cfg: ExperimentConfig) -> float:
    s = cfg.system
    return blockage_threshold_db(s.noise_dbm, s.label_reference_dbm, s.label_margin_db)


def blockage_dataset(cfg: ExperimentConfig, seed: int) -> list[LabeledSample]:
    """``n_samples`` labelled sequences split evenly over ``n_worlds`` independent worlds."""
    sc = cfg.scenario
    prm = world_params(cfg)
    rng = substream(seed, "blockage-data")
    per, extra = divmod(sc.n_samples, sc.n_worlds)
    out = []
    for i in range(sc.n_worlds):
        n = per + (1 if i < extra else 0)
        if n == 0:
            continue
        w = random_world(rng, cfg.system.n_ues, prm)
        out += make_dataset(w, n, sc.label_horizon, lam=cfg.system.wavelength,
                            threshold_db=label_threshold_db(cfg),
                            attenuation_db=cfg.system.blockage_attenuation_db, F=sc.frames,
                            H=sc.frame_height, Wd=sc.frame_width, dt_frame=1.0 / sc.camera_fps,
                            macro_period=cfg.training.macro_period_ms / 1000.0,
                            sample_gap=sc.sample_gap_s)
    return out


@dataclass
class ArrayEstimator:
    """A trained CSI transformer bound to its array and amplitude scale."""

    model: CsiTransformer
    array: ArrayGeometry
    scale: float

    def estimate(self, ue_pos) -> np.ndarray:
        """(K, n) phase-referenced channel estimates at physical amplitude."""
        ue_pos = np.atleast_2d(ue_pos)
        feats = np.stack([geometric_features(self.array, u) for u in ue_pos])
        return self.model.estimate(feats) * self.scale


@dataclass
class Phase1Models:
    bs: ArrayEstimator
    ris: ArrayEstimator
    vit: VisionTransformer

    def save(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name, m in zip(CHECKPOINTS, (self.bs.model, self.ris.model, self.vit)):
            save_checkpoint(d / name, m.state_dict())


def _array_scale(cfg: ExperimentConfig) -> float:
    return amplitude_scale(cfg.system.wavelength, cfg.csi.distance_scale_m)


def init_phase1(cfg: ExperimentConfig, system, seed: int) -> Phase1Models:
    """Untrained bundle with the configured architectures."""
    rng = substream(seed, "init-phase1")
    scale = _array_scale(cfg)
    bs = ArrayEstimator(CsiTransformer(csi_model_config(cfg, system.N), rng), system.bs, scale)
    ris = ArrayEstimator(CsiTransformer(csi_model_config(cfg, system.M), rng), system.ris, scale)
    return Phase1Models(bs, ris, VisionTransformer(vit_model_config(cfg), rng))


def load_phase1(cfg: ExperimentConfig, system, directory) -> Phase1Models:
    d = Path(directory)
    missing = [n for n in CHECKPOINTS if not (d / n).exists()]
    if missing:
        raise FileNotFoundError(f"missing phase-1 checkpoints in {d}: {', '.join(missing)}")
    models = init_phase1(cfg, system, 0)
    for name, m in zip(CHECKPOINTS, (models.bs.model, models.ris.model, models.vit)):
        m.load_state_dict(load_checkpoint(d / name))
    return models


def train_csi_for(cfg: ExperimentConfig, est: ArrayEstimator, seed: int, tag: str):
    t = cfg.training
    pos = sample_positions(substream(seed, f"csi-positions-{tag}"), cfg.csi.n_samples,
                           cfg.scenario.ue_lo, cfg.scenario.ue_hi)
    data = make_csi_dataset(est.array, cfg.system.wavelength, pos, est.scale)
    return train_csi(est.model, data, t.csi_epochs, t.csi_batch, t.csi_lr,
                     substream(seed, f"csi-train-{tag}"), t.lr_schedule)


def train_vit_for(cfg: ExperimentConfig, vit: VisionTransformer, samples, seed: int):
    t = cfg.training
    x, y = stack_samples(samples)
    tr, va, _ = split_indices(len(samples), substream(seed, "data-split"))
    val = (x[va], y[va]) if len(va) else None
    return train_vit(vit, x[tr], y[tr], t.vit_epochs, t.vit_batch, t.vit_lr,
                     substream(seed, "vit-train"), t.lr_schedule, t.bce_eps, val)


def train_phase1(cfg: ExperimentConfig, system, seed: int) -> Phase1Models:
    models = init_phase1(cfg, system, seed)
    log.info("training BS CSI transformer")
    train_csi_for(cfg, models.bs, seed, "bs")
    log.info("training RIS CSI transformer")
    train_csi_for(cfg, models.ris, seed, "ris")
    log.info("training blockage ViT")
    train_vit_for(cfg, models.vit, blockage_dataset(cfg, seed), seed)
    return models


def approach_world(cfg: ExperimentConfig, rng: np.random.Generator,
                   warning_frames: int = 20) -> WorldState:
    """One blocker sliding across UE 0's line of sight; the other UEs sit close to the BS.

    The blocker starts ``warning_frames`` camera frames (at its speed) short of
    the line, so the occlusion lands near that frame index.
    """
    sc = cfg.scenario
    K = cfg.system.n_ues
    half = np.asarray(sc.blocker_half_extents, dtype=np.float64)
    x_ue = rng.uniform(30.0, 50.0)
    y_ue = rng.uniform(-3.0, 3.0)
    bx = rng.uniform(12.0, x_ue - 6.0)
    speed = rng.uniform(*sc.blocker_speed)
    side = rng.choice([-1.0, 1.0])
    y_line = y_ue * bx / x_ue
    y0 = y_line + side * (half[1] + speed * warning_frames / sc.camera_fps)
    z_mid = 0.5 * (sc.arena_lo[2] + sc.arena_hi[2])
    blocker = Blocker(np.array([bx, y0, z_mid]), np.array([0.0, -side * speed, 0.0]), half)
    ue_pos = np.zeros((K, 3))
    ue_pos[0] = (x_ue, y_ue, 0.5)
    for k in range(1, K):
        # short links on the far side never cross the blocker's x-range
        ue_pos[k] = (6.0, -side * (10.0 + 3.0 * k), 0.5)
    return WorldState(0.0, ue_pos, np.zeros((K, 3)), (blocker,), world_params(cfg))


def approach_lead_times(vit: VisionTransformer, cfg: ExperimentConfig, seed: int,
                        n_worlds: int = 20, warning_frames: int = 20,
                        threshold: float = 0.5) -> list:
    """Warning length in camera frames before UE 0's occlusion, one entry per scenario."""
    sc = cfg.scenario
    dt = 1.0 / sc.camera_fps
    rng = substream(seed, "approach")
    out = []
    for _ in range(n_worlds):
        w = approach_world(cfg, rng, warning_frames)
        frames, blocked = [], []
        for _ in range(warning_frames + 15):
            frames.append(render_frames(w, sc.frames, sc.frame_height, sc.frame_width, dt))
            blocked.append(occluded_ues(w)[0])
            w = step_world(w, dt)
        if not any(blocked):
            continue
        event = int(np.argmax(blocked))
        probs = predict(vit, np.stack(frames))[:, 0]
        out.append(event_lead_times(probs, [event], threshold)[0])
    return out
