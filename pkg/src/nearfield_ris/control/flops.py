"""Closed-form operation counts for the per-frame inference path.

Counts are multiply-accumulates (MACs) of dense layers and attention
products; FLOPs are reported as 2 x MACs.  Softmax, normalization and
activations are ignored (linear in sequence length, negligible here).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

# Per-component GFLOPs cited for N=128, M=100, K=10, 2025 patches, 12 ViT blocks.
REFERENCE_GFLOPS = {"csi_transformer": 0.12, "vit": 4.82, "hdrl_agent": 0.15, "total": 5.09}


@dataclass(frozen=True)
class EncoderCount:
    projections: int  # Q, K, V and output maps
    attention: int  # scores and weighted values, quadratic in tokens
    feed_forward: int

    @property
    def total(self) -> int:
        return self.projections + self.attention + self.feed_forward


def encoder_macs(tokens: int, d_model: int, layers: int, heads: int, d_k: int, d_v: int,
                 d_ff: int | None = None) -> EncoderCount:
    d_ff = 4 * d_model if d_ff is None else d_ff
    T = tokens
    proj = T * d_model * heads * (2 * d_k + d_v) + T * heads * d_v * d_model
    attn = heads * T * T * (d_k + d_v)
    ffn = 2 * T * d_model * d_ff
    return EncoderCount(layers * proj, layers * attn, layers * ffn)


def mlp_macs(sizes) -> int:
    return sum(a * b for a, b in zip(sizes[:-1], sizes[1:]))


@dataclass(frozen=True)
class FlopReport:
    csi_transformer: float  # GFLOPs per TTI for all K users
    csi_attention: float  # quadratic-in-N part of the above
    vit: float  # GFLOPs per camera frame sequence
    hdrl_agent: float  # GFLOPs per TTI (sub actor) plus per macro-step (meta actor)
    total: float

    def as_dict(self) -> dict:
        return asdict(self)


def flop_report(*, N: int, M: int, K: int, csi_d_model: int, csi_layers: int, csi_heads: int,
                csi_d_k: int, csi_d_v: int, vit_patches: int, vit_patch_dim: int,
                vit_d_model: int, vit_layers: int, vit_heads: int, vit_d_k: int, vit_d_v: int,
                vit_mlp: tuple, agent_hidden: tuple) -> FlopReport:
    """Analytic counts for one frame: CSI for K users, one ViT pass, one agent decision."""
    g = 2e-9  # MAC -> GFLOP
    enc = encoder_macs(N, csi_d_model, csi_layers, csi_heads, csi_d_k, csi_d_v)
    csi_one = N * 3 * csi_d_model + enc.total + csi_d_model * 2 * N
    csi = K * csi_one
    tokens = vit_patches + 1
    venc = encoder_macs(tokens, vit_d_model, vit_layers, vit_heads, vit_d_k, vit_d_v)
    vit = vit_patches * vit_patch_dim * vit_d_model + venc.total \
        + mlp_macs((vit_d_model, *vit_mlp, K))
    sub = mlp_macs((2 * N * K + K, *agent_hidden, 2 * N * K + M))
    meta = mlp_macs((4 * K, *agent_hidden, K))
    total = csi + vit + sub + meta
    return FlopReport(g * csi, g * K * enc.attention, g * vit, g * (sub + meta), g * total)


def flop_report_for(cfg) -> FlopReport:
    """Counts for the architectures an ``ExperimentConfig`` describes."""
    s, sc, c, v = cfg.system, cfg.scenario, cfg.csi, cfg.vit
    patches = (sc.frame_height // v.patch) * (sc.frame_width // v.patch)
    return flop_report(N=s.n_bs, M=s.n_ris, K=s.n_ues, csi_d_model=c.d_model,
                       csi_layers=c.n_layers, csi_heads=c.heads, csi_d_k=c.d_k, csi_d_v=c.d_v,
                       vit_patches=patches, vit_patch_dim=v.patch * v.patch * sc.frames,
                       vit_d_model=v.d_model, vit_layers=v.n_layers, vit_heads=v.heads,
                       vit_d_k=v.d_k, vit_d_v=v.d_v, vit_mlp=tuple(v.mlp_hidden),
                       agent_hidden=tuple(cfg.agent.hidden))


def reference_scale_report() -> FlopReport:
    """The configuration the reference values were quoted for (10 RGB frames, 16px patches)."""
    return flop_report(N=128, M=100, K=10, csi_d_model=512, csi_layers=6, csi_heads=8,
                       csi_d_k=64, csi_d_v=64, vit_patches=2025, vit_patch_dim=16 * 16 * 30,
                       vit_d_model=768, vit_layers=12, vit_heads=12, vit_d_k=64, vit_d_v=64,
                       vit_mlp=(512, 256, 128), agent_hidden=(512, 512, 512))


def report_rows(report: FlopReport, reference: dict | None = None) -> list[list]:
    rows = [["component", "gflops", "reference_gflops", "ratio"]]
    for name in ("csi_transformer", "vit", "hdrl_agent", "total"):
        val = getattr(report, name)
        ref = (reference or {}).get(name)
        rows.append([name, repr(val), "" if ref is None else repr(ref),
                     "" if ref is None else repr(val / ref)])
    return rows
