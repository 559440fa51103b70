"""Uniform planar arrays, element geometry and near-field phase analysis.

All arrays lie in a plane parallel to the y-z plane.  Element ``n`` of an
array with ``rows`` (z) by ``cols`` (y) elements sits at linear index
``n = iz * cols + iy`` (z-major, then y), with centered local indices
``-(cols-1)/2 ... (cols-1)/2`` so that the centroid is the array center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


def wavelength(carrier_hz: float) -> float:
    if carrier_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / carrier_hz


def as_position(p) -> np.ndarray:
    """Coerce to a finite float64 3-vector."""
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"position must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("position components must be finite")
    return arr


@dataclass(frozen=True)
class ArrayGeometry:
    rows: int
    cols: int
    spacing: float
    center: np.ndarray
    elements: np.ndarray  # (rows*cols, 3) absolute coordinates

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def local_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Centered (n_y, n_z) index per element, in linear order."""
        iy = np.arange(self.cols) - (self.cols - 1) / 2.0
        iz = np.arange(self.rows) - (self.rows - 1) / 2.0
        zz, yy = np.meshgrid(iz, iy, indexing="ij")
        return yy.reshape(-1), zz.reshape(-1)


def build_upa(rows: int, cols: int, spacing: float, center=(0.0, 0.0, 0.0)) -> ArrayGeometry:
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"array dimensions must be positive integers, got {rows}x{cols}")
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    rows, cols = int(rows), int(cols)
    c = as_position(center)
    ny = np.arange(cols) - (cols - 1) / 2.0
    nz = np.arange(rows) - (rows - 1) / 2.0
    zz, yy = np.meshgrid(nz, ny, indexing="ij")
    local = np.stack(
        [np.zeros(rows * cols), yy.reshape(-1) * spacing, zz.reshape(-1) * spacing], axis=1
    )
    elements = local + c
    elements.setflags(write=False)
    c.setflags(write=False)
    return ArrayGeometry(rows, cols, float(spacing), c, elements)


def aperture(g: ArrayGeometry) -> float:
    """Largest element-to-element distance (the planar diagonal for a UPA)."""
    if g.size == 0:
        raise ValueError("empty geometry")
    corners = g.elements[[0, g.cols - 1, g.size - g.cols, g.size - 1]]
    diff = corners[:, None, :] - corners[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def rayleigh_distance(D: float, lam: float) -> float:
    if not lam > 0:
        raise ValueError("wavelength must be positive")
    if D < 0:
        raise ValueError("aperture must be non-negative")
    return 2.0 * D**2 / lam


def spherical_phase(r, theta, q, lam):
    """Exact phase of element at aperture offset ``q`` relative to the array center.

    Broadcasts over array inputs.
    """
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("radial distance must be positive")
    radicand = r**2 + np.asarray(q) ** 2 - 2.0 * r * q * np.sin(theta)
    if np.any(radicand < 0):
        # only reachable through rounding at the exactly collinear point
        if np.any(radicand < -1e-12 * r**2):
            raise FloatingPointError("negative radicand in spherical phase")
        radicand = np.maximum(radicand, 0.0)
    return 2.0 * np.pi / lam * (np.sqrt(radicand) - r)


def planar_phase(theta, q, lam):
    return 2.0 * np.pi / lam * np.asarray(q) * np.sin(theta)


def phase_error_approx(q, theta, r, lam):
    """Second-order estimate of the spherical-minus-planar phase discrepancy."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("radial distance must be positive")
    return np.pi * np.asarray(q) ** 2 * np.cos(theta) ** 2 / (lam * r)


def geometric_features(g: ArrayGeometry, ue) -> np.ndarray:
    """Per-element (distance, elevation, azimuth) seen from ``ue``; shape (N, 3).

    Azimuth uses the two-argument arctangent and is folded into (-pi, pi].
    """
    u = as_position(ue)
    delta = u - g.elements
    d = np.sqrt((delta**2).sum(axis=1))
    if np.any(d == 0.0):
        raise ValueError("UE coincides with an array element")
    elev = np.arcsin(np.clip(delta[:, 2] / d, -1.0, 1.0))
    azim = np.arctan2(delta[:, 1], delta[:, 0])
    azim = np.where(azim <= -np.pi, np.pi, azim)
    return np.stack([d, elev, azim], axis=1)
