"""Experiment configuration: one JSON document, validated, with desk-scale defaults.

Every block has defaults small enough to run on a laptop CPU.  The committed
``configs/table1.json`` overrides them with the full-scale simulation table.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .geometry import wavelength


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Vec3 = tuple[float, float, float]


class SystemConfig(_Block):
    bs_rows: int = Field(4, ge=1)
    bs_cols: int = Field(4, ge=1)
    ris_rows: int = Field(4, ge=1)
    ris_cols: int = Field(4, ge=1)
    bs_spacing_wl: float = Field(0.5, gt=0)  # in wavelengths
    ris_spacing_wl: float = Field(0.2, gt=0)
    bs_position: Vec3 = (0.0, 0.0, 0.0)
    ris_position: Vec3 = (15.0, 0.0, 15.0)
    carrier_hz: float = Field(3.5e9, gt=0)
    bandwidth_hz: float = Field(100e6, gt=0)
    p_max_dbm: float = 35.0
    noise_dbm: float = -94.0
    se_min: float = Field(1.0, ge=0)
    n_ues: int = Field(2, ge=1)
    blockage_attenuation_db: float = Field(30.0, ge=0)
    label_margin_db: float = 10.0
    label_reference_dbm: float = -1.0  # probe power used by the LoS availability rule

    @property
    def n_bs(self) -> int:
        return self.bs_rows * self.bs_cols

    @property
    def n_ris(self) -> int:
        return self.ris_rows * self.ris_cols

    @property
    def wavelength(self) -> float:
        return wavelength(self.carrier_hz)


class ScenarioConfig(_Block):
    ue_lo: Vec3 = (5.0, -25.0, 0.0)
    ue_hi: Vec3 = (55.0, 25.0, 1.0)
    arena_lo: Vec3 = (2.0, -27.5, -1.0)
    arena_hi: Vec3 = (55.0, 27.5, 4.0)
    n_blockers: int = Field(3, ge=0)
    blocker_half_extents: Vec3 = (4.0, 4.0, 2.5)
    blocker_speed: tuple[float, float] = (0.5, 2.0)
    ue_speed: tuple[float, float] = (0.0, 1.5)
    frames: int = Field(10, ge=1)
    frame_height: int = Field(32, ge=1)
    frame_width: int = Field(32, ge=1)
    camera_fps: float = Field(6.5, gt=0)
    label_horizon: int = Field(5, ge=1)  # macro-steps ahead a label looks
    n_samples: int = Field(1000, ge=1)
    n_worlds: int = Field(10, ge=1)
    sample_gap_s: float = Field(1.0, gt=0)


class CsiConfig(_Block):
    d_model: int = Field(32, ge=1)
    n_layers: int = Field(2, ge=1)
    heads: int = Field(2, ge=1)
    d_k: int = Field(16, ge=1)
    d_v: int = Field(16, ge=1)
    cnn_channels: tuple[int, int, int] = (8, 16, 32)
    cnn_hidden: int = Field(64, ge=1)
    distance_scale_m: float = Field(30.0, gt=0)
    n_samples: int = Field(200, ge=1)


class VitConfig(_Block):
    patch: int = Field(8, ge=1)
    d_model: int = Field(32, ge=1)
    n_layers: int = Field(2, ge=1)
    heads: int = Field(2, ge=1)
    d_k: int = Field(16, ge=1)
    d_v: int = Field(16, ge=1)
    mlp_hidden: tuple[int, ...] = (64, 32)


class AgentConfig(_Block):
    hidden: tuple[int, ...] = (64, 64)
    qos_penalty: float = Field(1.0, ge=0)
    reward_scale: float = Field(0.1, gt=0)
    ou_theta: float = Field(0.15, gt=0)
    ou_sigma: float = Field(0.3, ge=0)


class TrainingConfig(_Block):
    episodes: int = Field(10, ge=0)
    t_macro: int = Field(10, ge=1)
    n_macro: int = Field(154, ge=1)
    tti_ms: float = Field(1.0, gt=0)
    update_every: int = Field(4, ge=1)
    csi_epochs: int = Field(200, ge=0)
    vit_epochs: int = Field(40, ge=0)
    csi_lr: float = Field(1e-3, gt=0)
    vit_lr: float = Field(1e-3, gt=0)
    agent_lr: float = Field(1e-3, gt=0)
    lr_schedule: Literal["constant", "cosine"] = "cosine"
    csi_batch: int = Field(16, ge=1)
    vit_batch: int = Field(32, ge=1)
    hdrl_batch: int = Field(64, ge=1)
    gamma_l: float = Field(0.99, ge=0, le=1)
    gamma_h: float = Field(0.9, ge=0, le=1)
    tau: float = Field(0.001, ge=0, le=1)
    buffer_sub: int = Field(100_000, ge=1)
    buffer_meta: int = Field(10_000, ge=1)
    bce_eps: float = Field(1e-7, gt=0)

    @property
    def macro_period_ms(self) -> float:
        return self.n_macro * self.tti_ms


class SweepConfig(_Block):
    parameter: str = "system.p_max_dbm"
    values: tuple[float, ...] = (25.0, 30.0, 35.0)
    pipeline: Literal["oracle", "drl_no_ris", "drl_ris", "hdrl_no_ris", "hdrl_ris"] = "oracle"


class ExperimentConfig(_Block):
    seed: int = 0
    system: SystemConfig = SystemConfig()
    scenario: ScenarioConfig = ScenarioConfig()
    csi: CsiConfig = CsiConfig()
    vit: VitConfig = VitConfig()
    agent: AgentConfig = AgentConfig()
    training: TrainingConfig = TrainingConfig()
    sweep: SweepConfig = SweepConfig()

    @model_validator(mode="after")
    def _check(self):
        sc, v = self.scenario, self.vit
        if sc.frame_height % v.patch or sc.frame_width % v.patch:
            raise ValueError(f"frames {sc.frame_height}x{sc.frame_width} do not tile into "
                             f"{v.patch}px patches")
        if self.csi.d_model % self.csi.heads or v.d_model % v.heads:
            raise ValueError("model width must be divisible by the head count")
        return self


class ConfigError(ValueError):
    """Invalid configuration text; the message names the offending path."""


def parse_config(text: str) -> ExperimentConfig:
    text = text.strip()
    try:
        data = json.loads(text) if text else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        msgs = ["{}: {}".format(".".join(str(p) for p in e["loc"]) or "<root>", e["msg"])
                for e in exc.errors()]
        raise ConfigError("; ".join(msgs)) from exc


def config_echo(cfg: ExperimentConfig) -> dict:
    """Full config as plain JSON data, plus derived timescale values."""
    data = cfg.model_dump(mode="json")
    data["derived"] = {
        "n_bs": cfg.system.n_bs,
        "n_ris": cfg.system.n_ris,
        "wavelength_m": cfg.system.wavelength,
        "macro_period_ms": cfg.training.macro_period_ms,
    }
    return data


def dumps_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)


def config_hash(cfg: ExperimentConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    canon = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def with_override(cfg: ExperimentConfig, dotted: str, value) -> ExperimentConfig:
    """Copy of ``cfg`` with one ``block.field`` replaced, re-validated."""
    data = cfg.model_dump(mode="json")
    *path, leaf = dotted.split(".")
    node = data
    for key in path:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"{dotted}: no such block")
        node = node[key]
    if leaf not in node:
        raise ConfigError(f"{dotted}: no such field")
    node[leaf] = value
    return parse_config(json.dumps(data))
