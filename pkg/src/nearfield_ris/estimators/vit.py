"""Blockage prediction from occupancy frames: ViT-lite and a frame-token baseline.

Both models output, per UE, the probability that its line-of-sight link will
be *blocked* over the prediction horizon.  Datasets store availability bits
(1 = LoS available), so the training target is ``1 - availability``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..neural import Encoder, LayerNorm, Linear, Module, ReLU, Sigmoid, bce_loss
from ..scenario import LabeledSample
from .training import TrainResult, fit


@dataclass(frozen=True)
class VitModelConfig:
    height: int = 32
    width: int = 32
    in_channels: int = 10  # frames x channels per frame, stacked
    patch: int = 8
    d_model: int = 32
    n_layers: int = 2
    heads: int = 2
    d_k: int = 16
    d_v: int = 16
    mlp_hidden: tuple = (64, 32)
    n_outputs: int = 2  # one sigmoid per UE, in UE index order

    def __post_init__(self):
        if self.patch < 1 or self.height % self.patch or self.width % self.patch:
            raise ValueError(
                f"{self.height}x{self.width} frames do not tile into {self.patch}px patches")

    @property
    def n_patches(self) -> int:
        return (self.height // self.patch) * (self.width // self.patch)

    @property
    def patch_dim(self) -> int:
        return self.in_channels * self.patch * self.patch

    @classmethod
    def reference(cls, n_outputs: int = 10) -> "VitModelConfig":
        # 960x540 does not tile into 16px squares; 960x544 is the nearest grid that does.
        return cls(height=544, width=960, in_channels=30, patch=16, d_model=768, n_layers=12,
                   heads=12, d_k=64, d_v=64, mlp_hidden=(512, 256, 128), n_outputs=n_outputs)


def patchify(x: np.ndarray, patch: int) -> np.ndarray:
    """(B, C, H, W) -> (B, N_p, C*P*P), patches in row-major grid order."""
    B, C, H, W = x.shape
    if H % patch or W % patch:
        raise ValueError(f"{H}x{W} frames do not tile into {patch}px patches")
    g = x.reshape(B, C, H // patch, patch, W // patch, patch)
    return g.transpose(0, 2, 4, 1, 3, 5).reshape(B, (H // patch) * (W // patch), C * patch * patch)


class MlpHead(Module):
    """Hidden ReLU layers then a linear map to one logit per output and a sigmoid."""

    def __init__(self, d_in: int, hidden, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.layers = []
        for i, h in enumerate(hidden):
            self.layers.append(self.add_child(f"fc{i}", Linear(d_in, h, rng)))
            self.layers.append(ReLU())
            d_in = h
        self.layers.append(self.add_child("out", Linear(d_in, n_out, rng)))
        self.layers.append(Sigmoid())

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


def _as_batch(frames, dims: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == dims - 1:
        return x[None], True
    if x.ndim != dims:
        raise ValueError(f"expected {dims - 1}- or {dims}-d frames, got shape {x.shape}")
    return x, False


class VisionTransformer(Module):
    """Channel-stacked patches, bias-free patch embedding, class token, pre-norm encoder."""

    def __init__(self, cfg: VitModelConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        D = cfg.d_model
        self.embed = self.add_child("embed", Linear(cfg.patch_dim, D, rng, bias=False))
        self.add_param("cls", rng.normal(0.0, 0.02, D))
        self.add_param("pos", rng.normal(0.0, 0.02, (cfg.n_patches + 1, D)))
        self.encoder = self.add_child(
            "encoder", Encoder(cfg.n_layers, D, cfg.heads, cfg.d_k, cfg.d_v, 4 * D, rng))
        self.norm = self.add_child("norm", LayerNorm(D))
        self.head = self.add_child("head", MlpHead(D, cfg.mlp_hidden, cfg.n_outputs, rng))

    def forward(self, frames):
        """(C', H, W) or (B, C', H, W) frames -> (K,) or (B, K) blocked probabilities."""
        x, squeeze = _as_batch(frames, 4)
        cfg = self.cfg
        if x.shape[1:] != (cfg.in_channels, cfg.height, cfg.width):
            raise ValueError(f"expected ({cfg.in_channels}, {cfg.height}, {cfg.width}) frames, "
                             f"got {tuple(x.shape[1:])}")
        tokens = self.embed.forward(patchify(x, cfg.patch))
        cls = np.broadcast_to(self.params["cls"], (x.shape[0], 1, cfg.d_model))
        z = np.concatenate([cls, tokens], axis=1) + self.params["pos"]
        z = self.norm.forward(self.encoder.forward(z))
        self._shape = z.shape
        p = self.head.forward(z[:, 0])
        self._squeeze = squeeze
        return p[0] if squeeze else p

    def backward(self, dp):
        if self._squeeze:
            dp = dp[None]
        dz = np.zeros(self._shape)
        dz[:, 0] = self.head.backward(dp)
        dz = self.encoder.backward(self.norm.backward(dz))
        self.grads["pos"] += dz.sum(axis=0)
        self.grads["cls"] += dz[:, 0].sum(axis=0)
        self.embed.backward(dz[:, 1:])


@dataclass(frozen=True)
class BaselineConfig:
    frames: int = 10
    height: int = 32
    width: int = 32
    d_model: int = 32
    n_layers: int = 2
    heads: int = 2
    d_k: int = 16
    d_v: int = 16
    mlp_hidden: tuple = (64, 32)
    n_outputs: int = 2


class TransformerBlockageBaseline(Module):
    """One token per whole frame, pre-norm encoder, mean pooling, same sigmoid head."""

    def __init__(self, cfg: BaselineConfig, rng: np.random.Generator):
        super().__init__()
        self.cfg = cfg
        D = cfg.d_model
        self.embed = self.add_child("embed", Linear(cfg.height * cfg.width, D, rng))
        self.add_param("pos", rng.normal(0.0, 0.02, (cfg.frames, D)))
        self.encoder = self.add_child(
            "encoder", Encoder(cfg.n_layers, D, cfg.heads, cfg.d_k, cfg.d_v, 4 * D, rng))
        self.norm = self.add_child("norm", LayerNorm(D))
        self.head = self.add_child("head", MlpHead(D, cfg.mlp_hidden, cfg.n_outputs, rng))

    def forward(self, frames):
        x, squeeze = _as_batch(frames, 4)
        cfg = self.cfg
        if x.shape[1:] != (cfg.frames, cfg.height, cfg.width):
            raise ValueError(f"expected ({cfg.frames}, {cfg.height}, {cfg.width}) frames, "
                             f"got {tuple(x.shape[1:])}")
        z = self.embed.forward(x.reshape(x.shape[0], cfg.frames, -1)) + self.params["pos"]
        z = self.norm.forward(self.encoder.forward(z))
        self._shape = z.shape
        p = self.head.forward(z.mean(axis=1))
        self._squeeze = squeeze
        return p[0] if squeeze else p

    def backward(self, dp):
        if self._squeeze:
            dp = dp[None]
        B, T, D = self._shape
        dz = np.repeat(self.head.backward(dp)[:, None, :] / T, T, axis=1)
        dz = self.encoder.backward(self.norm.backward(dz))
        self.grads["pos"] += dz.sum(axis=0)
        self.embed.backward(dz)


def vit_forward(model: VisionTransformer, frames) -> np.ndarray:
    return model.forward(frames)


def transformer_blockage_baseline(model: TransformerBlockageBaseline, frames) -> np.ndarray:
    return model.forward(frames)


def stack_samples(samples: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    """Frames (S, F, H, W) and blocked targets (S, K) from availability-labelled samples."""
    x = np.stack([s.frames for s in samples]).astype(np.float64)
    y = 1.0 - np.stack([s.labels for s in samples]).astype(np.float64)
    return x, y


def train_vit(model: Module, frames: np.ndarray, blocked: np.ndarray, epochs: int, batch: int,
              lr: float, rng: np.random.Generator, schedule: str = "constant",
              eps: float = 1e-7, val: tuple | None = None) -> TrainResult:
    """BCE training for either blockage model; ``blocked`` holds 0/1 targets per UE."""
    return fit(model, frames, np.asarray(blocked, dtype=np.float64),
               lambda p, y: bce_loss(p, y, eps), epochs, batch, lr, rng, schedule, val)


def predict(model: Module, frames: np.ndarray, batch: int = 128) -> np.ndarray:
    return np.concatenate([model.forward(frames[i:i + batch])
                           for i in range(0, len(frames), batch)])


@dataclass(frozen=True)
class ClassificationReport:
    precision: float
    recall: float
    f1: float


def classification_metrics(probs, labels, threshold: float = 0.5) -> ClassificationReport:
    """Precision/recall/F1 of ``probs >= threshold`` against 0/1 ``labels``; 0 when undefined."""
    pred = np.asarray(probs) >= threshold
    truth = np.asarray(labels).astype(bool)
    tp = float(np.sum(pred & truth))
    fp = float(np.sum(pred & ~truth))
    fn = float(np.sum(~pred & truth))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ClassificationReport(precision, recall, f1)


def event_lead_times(probs, event_frames, threshold: float = 0.5) -> list:
    """Frames of warning per event: the event index minus the start of the unbroken
    above-threshold run that reaches it.  ``None`` when the event itself is below threshold.
    """
    above = np.asarray(probs) >= threshold
    out = []
    for e in event_frames:
        e = int(e)
        if not above[e]:
            out.append(None)
            continue
        start = e
        while start > 0 and above[start - 1]:
            start -= 1
        out.append(e - start)
    return out


def lead_time(probs, event_frames, threshold: float = 0.5) -> float:
    """Median warning in frames over detected events; missed events count as 0."""
    leads = [0 if v is None else v for v in event_lead_times(probs, event_frames, threshold)]
    return float(np.median(leads)) if leads else float("nan")


def frames_to_seconds(frames: float, fps: float = 6.5) -> float:
    return frames / fps


def split_indices(n: int, rng: np.random.Generator,
                  fractions=(0.8, 0.1, 0.1)) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded train/val/test index split."""
    order = rng.permutation(n)
    a = int(round(fractions[0] * n))
    b = a + int(round(fractions[1] * n))
    return order[:a], order[a:b], order[b:]
