"""Link-level environment: true channels, action decoding, reward and the per-step oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import ChannelSet, make_channel_set, mimo_channel
from ..config import SystemConfig
from ..geometry import ArrayGeometry, build_upa
from ..metrics import (
    LinkReport,
    dbm_to_watts,
    link_report,
    matched_filter_oracle,
    project_power,
    ris_single_user_oracle,
)


@dataclass(frozen=True)
class LinkSystem:
    bs: ArrayGeometry
    ris: ArrayGeometry
    G: np.ndarray  # (M, N) BS -> RIS
    lam: float
    p_max: float  # W
    noise: float  # W
    se_min: float
    attenuation_db: float

    @property
    def N(self) -> int:
        return self.bs.size

    @property
    def M(self) -> int:
        return self.ris.size

    def channels(self, ue_pos) -> ChannelSet:
        return make_channel_set(self.bs, self.ris, ue_pos, self.lam, G=self.G)


def build_system(cfg: SystemConfig) -> LinkSystem:
    lam = cfg.wavelength
    bs = build_upa(cfg.bs_rows, cfg.bs_cols, cfg.bs_spacing_wl * lam, cfg.bs_position)
    ris = build_upa(cfg.ris_rows, cfg.ris_cols, cfg.ris_spacing_wl * lam, cfg.ris_position)
    return LinkSystem(bs, ris, mimo_channel(bs, ris, lam), lam, dbm_to_watts(cfg.p_max_dbm),
                      dbm_to_watts(cfg.noise_dbm), cfg.se_min, cfg.blockage_attenuation_db)


@dataclass(frozen=True)
class SubAction:
    W: np.ndarray  # (N, K) complex, already power-projected
    phases: np.ndarray  # (M,) radians in [0, 2pi)


def decode_sub_action(a, N: int, K: int, M: int, p_max: float) -> SubAction:
    """Map actor outputs in [-1, 1] to a feasible (W, phases).

    The first 2NK entries are real then imaginary parts of W scaled by
    sqrt(p_max) and projected onto the power ball; the next M (if present) are
    angles as fractions of pi.  Without them the RIS keeps zero phases.
    """
    a = np.asarray(a, dtype=np.float64)
    nk = N * K
    if a.shape[0] not in (2 * nk, 2 * nk + M):
        raise ValueError(f"action length {a.shape[0]} fits neither {2 * nk} nor {2 * nk + M}")
    W = np.sqrt(p_max) * (a[:nk] + 1j * a[nk:2 * nk]).reshape(N, K)
    W = project_power(W, p_max)
    phases = np.mod(np.pi * a[2 * nk:], 2.0 * np.pi) if a.shape[0] > 2 * nk else np.zeros(M)
    return SubAction(W, phases)


def qos_penalty(se, se_min: float, weight: float = 1.0) -> float:
    return float(weight * np.sum(np.maximum(0.0, se_min - np.asarray(se))))


def env_step(system: LinkSystem, channels: ChannelSet, blocked, action: SubAction, g,
             penalty: float = 1.0) -> tuple[float, LinkReport]:
    """Reward on the true channels: sum SE minus the QoS shortfall penalty."""
    h_eff = channels.effective(action.phases, g, blocked, system.attenuation_db)
    report = link_report(h_eff, action.W, system.noise, system.se_min)
    return report.sum_se - qos_penalty(report.se, system.se_min, penalty), report


@dataclass(frozen=True)
class OracleStep:
    action: SubAction
    modes: np.ndarray
    report: LinkReport


def oracle_step(system: LinkSystem, channels: ChannelSet, blocked) -> OracleStep:
    """Closed-form yardstick on true channels.

    Each UE takes the better of its direct matched filter and the alternating
    RIS solution, each evaluated alone at power p_max/K.  For K=1 this is the
    single-user optimum of the direct mode and a local optimum of the RIS mode;
    with several UEs it ignores interference and the shared RIS phases follow
    the strongest RIS-served UE.
    """
    K, N, M = channels.dims
    p = system.p_max / K
    modes = np.ones(K, dtype=np.int8)
    W = np.zeros((N, K), dtype=np.complex128)
    phases = np.zeros(M)
    best_ris = -np.inf
    direct = channels.effective(np.zeros(M), np.ones(K, dtype=np.int8), blocked,
                                system.attenuation_db)
    for k in range(K):
        w_d, se_d = matched_filter_oracle(direct[k], p, system.noise)
        w_r, ph_r, se_r = ris_single_user_oracle(channels.h_rd[k], channels.G, p, system.noise)
        if se_r > se_d:
            modes[k] = 0
            W[:, k] = w_r
            if se_r > best_ris:
                best_ris, phases = se_r, ph_r
        else:
            W[:, k] = w_d[:, 0]
    action = SubAction(W, phases)
    h_eff = channels.effective(phases, modes, blocked, system.attenuation_db)
    return OracleStep(action, modes, link_report(h_eff, W, system.noise, system.se_min))


def single_user_se_bound(system: LinkSystem, channels: ChannelSet, blocked) -> float:
    """Upper bound on any feasible SE for K=1 across both serving modes.

    Direct: the matched filter is exact.  RIS: by the triangle inequality
    ||G^H diag(e^{-j phi}) h_rd|| <= sum_m |h_rd,m| ||G_m||.
    """
    if channels.dims[0] != 1:
        raise ValueError("bound is for a single UE")
    direct = channels.effective(np.zeros(channels.dims[2]), [1], blocked, system.attenuation_db)[0]
    g_direct = float(np.sum(np.abs(direct) ** 2))
    g_ris = float(np.sum(np.abs(channels.h_rd[0]) * np.linalg.norm(channels.G, axis=1)) ** 2)
    return float(np.log2(1.0 + system.p_max * max(g_direct, g_ris) / system.noise))
