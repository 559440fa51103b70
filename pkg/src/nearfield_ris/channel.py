"""Deterministic line-of-sight spherical-wave channels.

Channels are stored in physical units (amplitude gains around 1e-4 for
tens of meters at 3.5 GHz); nothing is rescaled here.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .geometry import ArrayGeometry, as_position


def path_loss(d, lam):
    """Free-space power gain (lambda / (4 pi d))^2."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if not lam > 0:
        raise ValueError("wavelength must be positive")
    return (lam / (4.0 * np.pi * d)) ** 2


def path_loss_db(d, lam):
    return -10.0 * np.log10(path_loss(d, lam))


def _los(d: np.ndarray, lam: float) -> np.ndarray:
    return np.sqrt(path_loss(d, lam)) * np.exp(-2j * np.pi * d / lam)


def los_channel(tx: ArrayGeometry, rx, lam: float) -> np.ndarray:
    """Length-N vector from every element of ``tx`` to the point ``rx``."""
    r = as_position(rx)
    d = np.sqrt(((tx.elements - r) ** 2).sum(axis=1))
    if np.any(d == 0.0):
        raise ValueError("receiver coincides with a transmit element")
    return _los(d, lam)


def mimo_channel(tx: ArrayGeometry, rx: ArrayGeometry, lam: float) -> np.ndarray:
    """(M, N) matrix, rows indexed by ``rx`` elements and columns by ``tx`` elements."""
    diff = rx.elements[:, None, :] - tx.elements[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    if np.any(d == 0.0):
        raise ValueError("arrays share an element position")
    return _los(d, lam)


def apply_blockage(h: np.ndarray, blocked: bool, attenuation_db: float = 30.0) -> np.ndarray:
    if attenuation_db < 0:
        raise ValueError("attenuation must be non-negative")
    if not blocked:
        return h
    return h * 10.0 ** (-attenuation_db / 20.0)


def effective_channel(h_bd, h_rd, G, phases, mode_bit: int) -> np.ndarray:
    """Serving-path channel ``v`` such that ``v^H`` is the row the BS sees.

    ``mode_bit == 1`` selects the direct link; ``0`` the RIS cascade
    ``(h_rd^H diag(e^{j phi}) G)^H``.
    """
    h_bd = np.asarray(h_bd)
    h_rd = np.asarray(h_rd)
    G = np.asarray(G)
    phases = np.asarray(phases, dtype=np.float64)
    M, N = G.shape if G.ndim == 2 else (-1, -1)
    if h_bd.shape != (N,) or h_rd.shape != (M,) or phases.shape != (M,):
        raise ValueError(
            f"dimension mismatch: h_bd {h_bd.shape}, h_rd {h_rd.shape}, "
            f"G {G.shape}, phases {phases.shape}"
        )
    if mode_bit not in (0, 1):
        raise ValueError("mode_bit must be 0 or 1")
    if mode_bit == 1:
        return h_bd
    return G.conj().T @ (np.exp(-1j * phases) * h_rd)


@dataclass(frozen=True)
class ChannelSet:
    h_bd: np.ndarray  # (K, N)
    h_rd: np.ndarray  # (K, M)
    G: np.ndarray  # (M, N)
    lam: float

    def __post_init__(self):
        K, N = self.h_bd.shape
        M = self.G.shape[0]
        if self.h_rd.shape != (K, M) or self.G.shape != (M, N):
            raise ValueError("inconsistent channel dimensions")

    @property
    def dims(self) -> tuple[int, int, int]:
        K, N = self.h_bd.shape
        return K, N, self.G.shape[0]

    def effective(self, phases, modes, blocked=None, attenuation_db: float = 30.0) -> np.ndarray:
        """(K, N) effective channels for per-UE modes, with direct-path blockage applied."""
        K, N, _ = self.dims
        out = np.empty((K, N), dtype=np.complex128)
        cascade = self.G.conj().T @ (np.exp(-1j * np.asarray(phases))[:, None] * self.h_rd.T)
        for k in range(K):
            if modes[k] == 1:
                b = bool(blocked[k]) if blocked is not None else False
                out[k] = apply_blockage(self.h_bd[k], b, attenuation_db)
            else:
                out[k] = cascade[:, k]
        return out


def make_channel_set(bs: ArrayGeometry, ris: ArrayGeometry, ues, lam: float,
                     G: np.ndarray | None = None) -> ChannelSet:
    ues = np.atleast_2d(np.asarray(ues, dtype=np.float64))
    h_bd = np.stack([los_channel(bs, u, lam) for u in ues])
    h_rd = np.stack([los_channel(ris, u, lam) for u in ues])
    if G is None:
        G = mimo_channel(bs, ris, lam)
    return ChannelSet(h_bd, h_rd, G, float(lam))


# Binary record: magic, version, K, N, M (little-endian uint32), lambda (float64),
# then h_bd, h_rd, G as row-major interleaved (re, im) float64.
_MAGIC = b"NFCH"
_VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


def _interleave(z: np.ndarray) -> bytes:
    flat = np.ascontiguousarray(z, dtype=np.complex128).reshape(-1)
    out = np.empty(2 * flat.size, dtype="<f8")
    out[0::2] = flat.real
    out[1::2] = flat.imag
    return out.tobytes()


def dumps_channel_set(cs: ChannelSet) -> bytes:
    K, N, M = cs.dims
    return (_HEADER.pack(_MAGIC, _VERSION, K, N, M, cs.lam)
            + _interleave(cs.h_bd) + _interleave(cs.h_rd) + _interleave(cs.G))


def loads_channel_set(buf: bytes) -> ChannelSet:
    magic, version, K, N, M, lam = _HEADER.unpack_from(buf, 0)
    if magic != _MAGIC:
        raise ValueError("not a channel-set record")
    if version != _VERSION:
        raise ValueError(f"unsupported channel-set version {version}")
    vals = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    if vals.size != 2 * (K * N + K * M + M * N):
        raise ValueError("truncated channel-set record")
    z = vals[0::2] + 1j * vals[1::2]
    h_bd = z[: K * N].reshape(K, N)
    h_rd = z[K * N: K * N + K * M].reshape(K, M)
    G = z[K * N + K * M:].reshape(M, N)
    return ChannelSet(h_bd.copy(), h_rd.copy(), G.copy(), float(lam))
