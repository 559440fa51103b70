"""Synthetic dynamic world: moving UEs and box blockers, occlusion, labels and frames.

Stands in for a ray-traced urban dataset.  Everything moves linearly with
reflecting walls, so trajectories are exactly time-reversible; frames ending
at the current time are obtained by rewinding a copy of the world.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import Iterator, NamedTuple

import numpy as np

from .channel import path_loss_db
from .geometry import as_position


@dataclass(frozen=True)
class Blocker:
    center: np.ndarray
    velocity: np.ndarray
    half_extents: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.half_extents) <= 0):
            raise ValueError("blocker half-extents must be positive")


@dataclass(frozen=True)
class WorldParams:
    """Static description of the world the state evolves in."""

    ue_lo: tuple = (5.0, -25.0, 0.0)
    ue_hi: tuple = (55.0, 25.0, 1.0)
    arena_lo: tuple = (2.0, -27.5, -1.0)
    arena_hi: tuple = (55.0, 27.5, 4.0)
    bs_position: tuple = (0.0, 0.0, 0.0)
    n_blockers: int = 3
    blocker_half_extents: tuple = (4.0, 4.0, 2.5)
    blocker_speed: tuple = (0.5, 2.0)
    ue_speed: tuple = (0.0, 1.5)


@dataclass(frozen=True)
class WorldState:
    time: float
    ue_pos: np.ndarray  # (K, 3)
    ue_vel: np.ndarray  # (K, 3)
    blockers: tuple = ()
    params: WorldParams = field(default_factory=WorldParams)
    seed: int | None = None

    @property
    def K(self) -> int:
        return self.ue_pos.shape[0]


def random_world(rng: np.random.Generator, K: int, params: WorldParams = WorldParams(),
                 seed: int | None = None) -> WorldState:
    lo, hi = np.asarray(params.ue_lo), np.asarray(params.ue_hi)
    ue_pos = lo + rng.random((K, 3)) * (hi - lo)
    heading = rng.uniform(0, 2 * np.pi, K)
    speed = rng.uniform(*params.ue_speed, K)
    ue_vel = np.stack([speed * np.cos(heading), speed * np.sin(heading), np.zeros(K)], axis=1)
    a_lo, a_hi = np.asarray(params.arena_lo), np.asarray(params.arena_hi)
    half = np.asarray(params.blocker_half_extents, dtype=np.float64)
    blockers = []
    for _ in range(params.n_blockers):
        c_lo, c_hi = a_lo + half, a_hi - half
        center = c_lo + rng.random(3) * (c_hi - c_lo)
        center[2] = 0.5 * (a_lo[2] + a_hi[2])
        th = rng.uniform(0, 2 * np.pi)
        sp = rng.uniform(*params.blocker_speed)
        vel = np.array([sp * np.cos(th), sp * np.sin(th), 0.0])
        blockers.append(Blocker(center, vel, half.copy()))
    return WorldState(0.0, ue_pos, ue_vel, tuple(blockers), params, seed)


def _reflect(p: np.ndarray, v: np.ndarray, dt: float, lo, hi):
    """Linear motion folded into [lo, hi] per axis (exact multi-bounce)."""
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), p.shape)
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), p.shape)
    span = hi - lo
    raw = p + v * dt
    out = raw.copy()
    vel = v.copy()
    m = span > 0
    if np.any(m):
        u = (raw[m] - lo[m]) / span[m]
        k = np.floor(u)
        frac = u - k
        odd = np.mod(k, 2.0) == 1.0
        out[m] = lo[m] + np.where(odd, 1.0 - frac, frac) * span[m]
        vel[m] = np.where(odd, -v[m], v[m])
    out[~m] = lo[~m]
    return out, vel


def _advance(w: WorldState, dt: float) -> WorldState:
    prm = w.params
    ue_pos, ue_vel = _reflect(w.ue_pos, w.ue_vel, dt, prm.ue_lo, prm.ue_hi)
    a_lo, a_hi = np.asarray(prm.arena_lo), np.asarray(prm.arena_hi)
    blockers = []
    for b in w.blockers:
        c, v = _reflect(b.center, b.velocity, dt, a_lo + b.half_extents, a_hi - b.half_extents)
        blockers.append(Blocker(c, v, b.half_extents))
    return replace(w, time=w.time + dt, ue_pos=ue_pos, ue_vel=ue_vel, blockers=tuple(blockers))


def step_world(w: WorldState, dt: float) -> WorldState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return _advance(w, dt)


def segment_hits_box(a, b, lo, hi) -> bool:
    """Slab test: does the closed segment a-b intersect the box [lo, hi]?"""
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(b, dtype=np.float64) - a
    t0, t1 = 0.0, 1.0
    for ax in range(3):
        if d[ax] == 0.0:
            if a[ax] < lo[ax] or a[ax] > hi[ax]:
                return False
            continue
        ta = (lo[ax] - a[ax]) / d[ax]
        tb = (hi[ax] - a[ax]) / d[ax]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return True


def occlusion_test(a, b, blockers) -> bool:
    a = as_position(a)
    b = as_position(b)
    if np.array_equal(a, b):
        raise ValueError("segment endpoints coincide")
    for blk in blockers:
        if segment_hits_box(a, b, blk.center - blk.half_extents, blk.center + blk.half_extents):
            return True
    return False


def occluded_ues(w: WorldState) -> np.ndarray:
    bs = np.asarray(w.params.bs_position, dtype=np.float64)
    return np.array([occlusion_test(bs, u, w.blockers) for u in w.ue_pos], dtype=bool)


def blockage_threshold_db(noise_dbm: float, reference_dbm: float, margin_db: float = 10.0) -> float:
    """Largest LoS path loss keeping a ``reference_dbm`` probe ``margin_db`` above the noise floor."""
    return reference_dbm - (noise_dbm + margin_db)


def blockage_label(pl_los_db: float, pl_threshold_db: float) -> int:
    """1 when the LoS link is available (path loss strictly under the threshold)."""
    return int(pl_los_db < pl_threshold_db)


def los_path_loss_db(w: WorldState, lam: float, attenuation_db: float = 30.0) -> np.ndarray:
    bs = np.asarray(w.params.bs_position, dtype=np.float64)
    d = np.sqrt(((w.ue_pos - bs) ** 2).sum(axis=1))
    return path_loss_db(d, lam) + attenuation_db * occluded_ues(w)


def los_available(w: WorldState, lam: float, threshold_db: float,
                  attenuation_db: float = 30.0) -> np.ndarray:
    pl = los_path_loss_db(w, lam, attenuation_db)
    return np.array([blockage_label(p, threshold_db) for p in pl], dtype=np.int8)


def ue_intensity(k: int, K: int) -> float:
    """Marker value for UE ``k``; UE 0 is 0.5, the rest step down so identities stay distinct."""
    return 0.5 - 0.25 * k / max(K, 1)


def _rasterize(w: WorldState, H: int, Wd: int) -> np.ndarray:
    prm = w.params
    x0, y0 = prm.arena_lo[0], prm.arena_lo[1]
    sx = (prm.arena_hi[0] - x0) / H
    sy = (prm.arena_hi[1] - y0) / Wd
    img = np.zeros((H, Wd))
    rows_lo = x0 + sx * np.arange(H)
    cols_lo = y0 + sy * np.arange(Wd)
    for blk in w.blockers:
        lo = blk.center - blk.half_extents
        hi = blk.center + blk.half_extents
        r = (rows_lo + sx > lo[0]) & (rows_lo < hi[0])
        c = (cols_lo + sy > lo[1]) & (cols_lo < hi[1])
        img[np.ix_(r, c)] = 1.0
    K = w.K
    for k in range(K):
        i = int(np.clip((w.ue_pos[k, 0] - x0) // sx, 0, H - 1))
        j = int(np.clip((w.ue_pos[k, 1] - y0) // sy, 0, Wd - 1))
        img[i, j] = max(img[i, j], ue_intensity(k, K))
    return img


def render_frames(w: WorldState, F: int = 10, H: int = 32, Wd: int = 32,
                  dt_frame: float = 1 / 6.5) -> np.ndarray:
    """Top-down occupancy frames at times t-(F-1)dt, ..., t (oldest first); shape (F, H, W).

    Rows index x (range from the BS), columns index y.
    """
    if F < 1 or H < 1 or Wd < 1:
        raise ValueError("frame count and size must be positive")
    cur = _advance(w, -(F - 1) * dt_frame) if F > 1 else w
    frames = np.empty((F, H, Wd))
    for f in range(F):
        frames[f] = _rasterize(cur, H, Wd)
        if f < F - 1:
            cur = _advance(cur, dt_frame)
    return np.clip(frames, 0.0, 1.0)


@dataclass(frozen=True)
class LabeledSample:
    frames: np.ndarray  # (F, H, W)
    labels: np.ndarray  # (K,) 1 = LoS available over the horizon
    time: float


def future_availability(w: WorldState, horizon: int, macro_period: float, lam: float,
                        threshold_db: float, attenuation_db: float = 30.0) -> np.ndarray:
    """LoS availability at each of the next ``horizon`` macro boundaries, AND-ed per UE."""
    avail = np.ones(w.K, dtype=np.int8)
    cur = w
    for _ in range(horizon):
        cur = _advance(cur, macro_period)
        avail &= los_available(cur, lam, threshold_db, attenuation_db)
    return avail


def make_dataset(w0: WorldState, n_samples: int, horizon: int = 1, *, lam: float,
                 threshold_db: float, attenuation_db: float = 30.0, F: int = 10, H: int = 32,
                 Wd: int = 32, dt_frame: float = 1 / 6.5, macro_period: float = 0.154,
                 sample_gap: float = 1.0) -> list[LabeledSample]:
    """Roll the world forward, emitting frames ending now and the LoS status ahead of them."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if horizon < 1:
        raise ValueError("horizon must be at least 1 macro-step")
    out = []
    w = w0
    for _ in range(n_samples):
        frames = render_frames(w, F, H, Wd, dt_frame)
        labels = future_availability(w, horizon, macro_period, lam, threshold_db, attenuation_db)
        out.append(LabeledSample(frames, labels, w.time))
        w = _advance(w, sample_gap)
    return out


class Tick(NamedTuple):
    step: int
    macro: int
    micro: int
    time: float
    boundary: bool


def macro_period(tti: float, n_macro: int) -> float:
    return tti * n_macro


def timescale_clock(tti: float = 1e-3, n_macro: int = 154,
                    n_steps: int | None = None) -> Iterator[Tick]:
    """Micro-step ticks; ``boundary`` marks the first TTI of each macro-step."""
    if not tti > 0:
        raise ValueError("tti must be positive")
    if n_macro < 1:
        raise ValueError("n_macro must be at least 1")
    step = 0
    while n_steps is None or step < n_steps:
        macro, micro = divmod(step, n_macro)
        yield Tick(step, macro, micro, step * tti, micro == 0)
        step += 1


# Dataset file: magic "NFDS", version, F, H, W, K, n (uint32 little-endian), then
# n*F*H*W float64 frames (sample, frame, row, col order), n*K uint8 labels,
# n float64 capture times.  All little-endian.
_DS_MAGIC = b"NFDS"
_DS_VERSION = 1
_DS_HEADER = struct.Struct("<4sIIIIII")


def dumps_dataset(samples: list[LabeledSample]) -> bytes:
    n = len(samples)
    F, H, W = samples[0].frames.shape
    K = samples[0].labels.shape[0]
    frames = np.stack([s.frames for s in samples]).astype("<f8")
    labels = np.stack([s.labels for s in samples]).astype(np.uint8)
    times = np.array([s.time for s in samples], dtype="<f8")
    return (_DS_HEADER.pack(_DS_MAGIC, _DS_VERSION, F, H, W, K, n)
            + frames.tobytes() + labels.tobytes() + times.tobytes())


def loads_dataset(buf: bytes) -> list[LabeledSample]:
    magic, version, F, H, W, K, n = _DS_HEADER.unpack_from(buf, 0)
    if magic != _DS_MAGIC:
        raise ValueError("not a dataset record")
    if version != _DS_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    off = _DS_HEADER.size
    nf = n * F * H * W
    frames = np.frombuffer(buf, dtype="<f8", count=nf, offset=off).reshape(n, F, H, W)
    off += 8 * nf
    labels = np.frombuffer(buf, dtype=np.uint8, count=n * K, offset=off).reshape(n, K)
    off += n * K
    times = np.frombuffer(buf, dtype="<f8", count=n, offset=off)
    return [LabeledSample(frames[i].copy(), labels[i].astype(np.int8), float(times[i]))
            for i in range(n)]
