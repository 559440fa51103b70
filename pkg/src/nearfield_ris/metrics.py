"""SINR / spectral efficiency, constraint handling and closed-form oracles."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


def sinr(h_eff, W, noise_power: float) -> np.ndarray:
    """Per-UE linear SINR.  ``h_eff`` is (K, N) with rows h_k; ``W`` is (N, K)."""
    if not noise_power > 0:
        raise ValueError("noise power must be positive")
    H = np.atleast_2d(np.asarray(h_eff))
    W = np.asarray(W)
    if W.ndim == 1:
        W = W[:, None]
    if H.shape[1] != W.shape[0] or H.shape[0] != W.shape[1]:
        raise ValueError(f"shape mismatch: h_eff {H.shape}, W {W.shape}")
    gains = np.abs(H.conj() @ W) ** 2  # gains[k, i] = |h_k^H w_i|^2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return signal / (interference + noise_power)


def spectral_efficiency(sinr_linear):
    s = np.asarray(sinr_linear, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("SINR must be non-negative")
    return np.log2(1.0 + s)


@dataclass(frozen=True)
class LinkReport:
    sinr: np.ndarray
    se: np.ndarray
    sum_se: float
    slack: np.ndarray


def link_report(h_eff, W, noise_power: float, se_min: float = 1.0) -> LinkReport:
    s = sinr(h_eff, W, noise_power)
    se = spectral_efficiency(s)
    return LinkReport(s, se, float(se.sum()), se - se_min)


def sum_se(report: LinkReport) -> float:
    return float(np.sum(report.se))


def qos_slack(report: LinkReport, se_min: float) -> np.ndarray:
    if se_min < 0:
        raise ValueError("se_min must be non-negative")
    return report.se - se_min


def project_power(W, p_max: float) -> np.ndarray:
    """Scale ``W`` onto the Frobenius ball ||W||_F^2 <= p_max (identity inside)."""
    if not p_max > 0:
        raise ValueError("p_max must be positive")
    W = np.asarray(W)
    power = float(np.sum(np.abs(W) ** 2))
    if power <= p_max:
        return W
    return W * np.sqrt(p_max / power)


def matched_filter_oracle(h, p: float, noise_power: float):
    """Single-user optimum w = sqrt(p) h/||h||; returns (W of shape (N, 1), SE)."""
    h = np.asarray(h)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("zero channel")
    w = np.sqrt(p) * h / norm
    se = float(np.log2(1.0 + p * norm**2 / noise_power))
    return w[:, None], se


def ris_alignment_oracle(h_rd, c):
    """Phases maximizing |h_rd^H diag(e^{j phi}) c| and the achieved power gain."""
    h_rd = np.asarray(h_rd)
    c = np.asarray(c)
    if h_rd.shape != c.shape:
        raise ValueError("h_rd and c must have the same length")
    terms = np.conj(h_rd) * c
    phases = np.mod(-np.angle(terms), 2.0 * np.pi)
    phases = np.where(terms == 0, 0.0, phases)
    gain = float(np.sum(np.abs(h_rd) * np.abs(c)) ** 2)
    return phases, gain


def cascade_gain(h_rd, c, phases) -> float:
    return float(np.abs(np.sum(np.conj(h_rd) * np.exp(1j * np.asarray(phases)) * c)) ** 2)


def ris_single_user_oracle(h_rd, G, p: float, noise_power: float, iters: int = 8):
    """Alternating matched filter / RIS alignment for one UE served through the RIS.

    Returns (w, phases, SE).  Each half-step is a closed-form optimum given the
    other, so the SE sequence is nondecreasing.
    """
    M, N = G.shape
    # start from the RIS-side dominant direction
    _, _, vh = np.linalg.svd(G, full_matrices=False)
    w = np.sqrt(p) * vh[0].conj()
    phases = np.zeros(M)
    for _ in range(iters):
        phases, _ = ris_alignment_oracle(h_rd, G @ w)
        h_eff = G.conj().T @ (np.exp(-1j * phases) * h_rd)
        w_col, _ = matched_filter_oracle(h_eff, p, noise_power)
        w = w_col[:, 0]
    h_eff = G.conj().T @ (np.exp(-1j * phases) * h_rd)
    se = float(np.log2(1.0 + p * np.linalg.norm(h_eff) ** 2 / noise_power))
    return w, phases, se


LINK_CSV_HEADER = ["step", "ue", "sinr_db", "se_bps_hz", "slack_bps_hz"]


def link_report_rows(step: int, report: LinkReport):
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10(report.sinr)
    return [[step, k, repr(float(sinr_db[k])), repr(float(report.se[k])),
             repr(float(report.slack[k]))] for k in range(len(report.se))]


def link_reports_to_csv(reports) -> str:
    """``reports`` is an iterable of (step, LinkReport)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LINK_CSV_HEADER)
    for step, rep in reports:
        writer.writerows(link_report_rows(step, rep))
    return buf.getvalue()
