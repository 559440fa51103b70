"""Geometry-to-channel estimators: the CSI transformer and its CNN baseline.

Both map per-antenna (distance, elevation, azimuth) tokens to a complex
channel of length N through a 2N-wide real head (real parts first, then
imaginary parts).  Targets are phase-referenced: the channel is rotated so
that element 0 is real-positive and divided by a fixed amplitude scale.
A per-UE common phase does not change any SINR, so beamforming loses
nothing by it, while the target becomes a smooth function of UE position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import los_channel, path_loss
from ..geometry import ArrayGeometry, geometric_features
from ..neural import Conv1d, Encoder, LayerNorm, Linear, Module, ReLU, mse_loss
from .training import TrainResult, fit


@dataclass(frozen=True)
class CsiModelConfig:
    n_tokens: int = 16
    d_model: int = 32
    n_layers: int = 2
    heads: int = 2
    d_k: int = 16
    d_v: int = 16
    d_ff: int | None = None  # defaults to 4 * d_model
    distance_scale: float = 30.0

    def __post_init__(self):
        if self.heads * self.d_v <= 0 or self.n_tokens < 1:
            raise ValueError("invalid CSI transformer dimensions")

    @property
    def ff_width(self) -> int:
        return self.d_ff if self.d_ff is not None else 4 * self.d_model

    @classmethod
    def reference(cls, n_tokens: int = 1024) -> "CsiModelConfig":
        return cls(n_tokens=n_tokens, d_model=512, n_layers=6, heads=8, d_k=64, d_v=64)


def _normalize_features(x: np.ndarray, distance_scale: float) -> np.ndarray:
    out = np.array(x, dtype=np.float64, copy=True)
    out[..., 0] /= distance_scale
    return out


def split_complex(h: np.ndarray) -> np.ndarray:
    return np.concatenate([h.real, h.imag], axis=-1)


def merge_complex(y: np.ndarray) -> np.ndarray:
    n = y.shape[-1] // 2
    return y[..., :n] + 1j * y[..., n:]


class CsiTransformer(Module):
    """Linear token embedding + learnable positions, pre-norm encoder, mean pooling, 2N head."""

    def __init__(self, cfg: CsiModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        N, d = cfg.n_tokens, cfg.d_model
        self.embed = self.add_child("embed", Linear(3, d, rng))
        self.add_param("pos", rng.normal(0.0, 0.02, (N, d)))
        self.encoder = self.add_child(
            "encoder", Encoder(cfg.n_layers, d, cfg.heads, cfg.d_k, cfg.d_v, cfg.ff_width, rng))
        self.norm = self.add_child("norm", LayerNorm(d))
        self.head = self.add_child("head", Linear(d, 2 * N, rng))

    def forward(self, features):
        x = np.asarray(features, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.shape[1] != self.cfg.n_tokens or x.shape[2] != 3:
            raise ValueError(
                f"expected ({self.cfg.n_tokens}, 3) tokens, got {tuple(x.shape[1:])}")
        h = self.embed.forward(_normalize_features(x, self.cfg.distance_scale)) + self.params["pos"]
        h = self.norm.forward(self.encoder.forward(h))
        self._T = h.shape[1]
        y = self.head.forward(h.mean(axis=1))
        self._squeeze = squeeze
        return y[0] if squeeze else y

    def backward(self, dy):
        if self._squeeze:
            dy = dy[None]
        dpool = self.head.backward(dy)
        dh = np.repeat(dpool[:, None, :] / self._T, self._T, axis=1)
        dh = self.encoder.backward(self.norm.backward(dh))
        self.grads["pos"] += dh.sum(axis=0)
        self.embed.backward(dh)

    def estimate(self, features) -> np.ndarray:
        return merge_complex(self.forward(features))


@dataclass(frozen=True)
class CnnCsiConfig:
    n_tokens: int = 16
    channels: tuple = (8, 16, 32)
    kernel: int = 3
    hidden: int = 64
    distance_scale: float = 30.0

    @classmethod
    def reference(cls, n_tokens: int = 1024) -> "CnnCsiConfig":
        return cls(n_tokens=n_tokens, channels=(64, 128, 256), hidden=512)


class CnnCsiEstimator(Module):
    """Three 1-D convolutions over the antenna axis, then a dense head."""

    def __init__(self, cfg: CnnCsiConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        self.convs = []
        self.acts = []
        c_in = 3
        for i, c in enumerate(cfg.channels):
            self.convs.append(self.add_child(f"conv{i}", Conv1d(c_in, c, cfg.kernel, rng)))
            self.acts.append(ReLU())
            c_in = c
        self.fc = self.add_child("fc", Linear(cfg.n_tokens * c_in, cfg.hidden, rng))
        self.fc_act = ReLU()
        self.head = self.add_child("head", Linear(cfg.hidden, 2 * cfg.n_tokens, rng))

    def forward(self, features):
        x = np.asarray(features, dtype=np.float64)
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.shape[1] != self.cfg.n_tokens:
            raise ValueError(f"expected {self.cfg.n_tokens} tokens, got {x.shape[1]}")
        h = _normalize_features(x, self.cfg.distance_scale)
        for conv, act in zip(self.convs, self.acts):
            h = act.forward(conv.forward(h))
        self._shape = h.shape
        y = self.head.forward(self.fc_act.forward(self.fc.forward(h.reshape(h.shape[0], -1))))
        self._squeeze = squeeze
        return y[0] if squeeze else y

    def backward(self, dy):
        if self._squeeze:
            dy = dy[None]
        dh = self.fc.backward(self.fc_act.backward(self.head.backward(dy))).reshape(self._shape)
        for conv, act in zip(reversed(self.convs), reversed(self.acts)):
            dh = conv.backward(act.backward(dh))

    def estimate(self, features) -> np.ndarray:
        return merge_complex(self.forward(features))


def csi_forward(model: CsiTransformer, features) -> np.ndarray:
    return model.estimate(features)


def cnn_csi_forward(model: CnnCsiEstimator, features) -> np.ndarray:
    return model.estimate(features)


def phase_reference(h: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Rotate each channel so entry 0 is real-positive, then divide by ``scale``."""
    h = np.asarray(h)
    ref = np.exp(-1j * np.angle(h[..., :1]))
    return h * ref / scale


def amplitude_scale(lam: float, distance: float) -> float:
    """Per-element LoS amplitude at ``distance``; used as a fixed normalizer."""
    return float(np.sqrt(path_loss(distance, lam)))


@dataclass
class CsiDataset:
    features: np.ndarray  # (S, N, 3)
    targets: np.ndarray  # (S, N) complex, phase-referenced and scaled
    positions: np.ndarray  # (S, 3)
    scale: float


def make_csi_dataset(bs: ArrayGeometry, lam: float, positions: np.ndarray,
                     scale: float) -> CsiDataset:
    feats = np.stack([geometric_features(bs, u) for u in positions])
    targets = np.stack([phase_reference(los_channel(bs, u, lam), scale) for u in positions])
    return CsiDataset(feats, targets, np.asarray(positions, dtype=np.float64), scale)


def sample_positions(rng: np.random.Generator, n: int, lo, hi) -> np.ndarray:
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    return lo + rng.random((n, 3)) * (hi - lo)


def nmse(est, truth) -> float:
    truth = np.asarray(truth)
    return float(np.sum(np.abs(np.asarray(est) - truth) ** 2) / np.sum(np.abs(truth) ** 2))


def mean_nmse(est, truth) -> float:
    """Average of per-sample NMSE over the leading axis."""
    est = np.asarray(est)
    truth = np.asarray(truth)
    err = np.sum(np.abs(est - truth) ** 2, axis=-1) / np.sum(np.abs(truth) ** 2, axis=-1)
    return float(np.mean(err))


def noisy_feature_injection(features, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white Gaussian noise per feature column at the given feature SNR."""
    x = np.asarray(features, dtype=np.float64)
    if np.isinf(snr_db) and snr_db > 0:
        return x.copy()
    power = np.mean(x**2, axis=tuple(range(x.ndim - 1)), keepdims=True)
    sigma = np.sqrt(power / 10.0 ** (snr_db / 10.0))
    return x + sigma * rng.standard_normal(x.shape)


def train_regressor(model: Module, features: np.ndarray, targets: np.ndarray, epochs: int,
                    batch: int, lr: float, rng: np.random.Generator,
                    schedule: str = "constant") -> TrainResult:
    """Adam on the summed-squared complex error, averaged per sample."""
    return fit(model, features, split_complex(np.asarray(targets)), mse_loss, epochs, batch,
               lr, rng, schedule)


def train_csi(model: Module, data: CsiDataset, epochs: int, batch: int, lr: float,
              rng: np.random.Generator, schedule: str = "constant") -> TrainResult:
    return train_regressor(model, data.features, data.targets, epochs, batch, lr, rng, schedule)


def nmse_vs_snr(model: Module, data: CsiDataset, snrs_db, rng: np.random.Generator) -> list:
    """Mean NMSE of ``model`` on noise-perturbed features for each SNR."""
    out = []
    for snr in snrs_db:
        noisy = noisy_feature_injection(data.features, snr, rng)
        out.append(mean_nmse(model.estimate(noisy), data.targets))
    return out
