"""Mode pipelines behind the command line.  Each writes its files into one output directory."""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

from ..config import ExperimentConfig, config_echo, config_hash, with_override
from ..control.env import build_system
from ..control.flops import (
    REFERENCE_GFLOPS,
    flop_report_for,
    reference_scale_report,
    report_rows,
)
from ..control.hdrl import KINDS, run_agent
from ..estimators.csi import make_csi_dataset, mean_nmse, sample_positions
from ..estimators.phase1 import (
    CHECKPOINTS,
    blockage_dataset,
    init_phase1,
    load_phase1,
    train_csi_for,
    train_vit_for,
)
from ..estimators.vit import classification_metrics, predict, split_indices, stack_samples
from ..neural import save_checkpoint
from ..rng import substream
from ..scenario import dumps_dataset

log = logging.getLogger(__name__)

MODES = ("gen-data", "train-csi", "train-vit", "train-hdrl", "baseline", "sweep", "flops")


class MissingArtifact(RuntimeError):
    """A mode was asked to run before the artifacts it consumes exist."""


def _banner(cfg: ExperimentConfig, seed: int, **extra) -> str:
    tail = "".join(f" {k}={v}" for k, v in extra.items())
    return f"# config_hash={config_hash(cfg)} seed={seed}{tail}\n"


def _csv_text(cfg, seed, rows, **extra) -> str:
    buf = io.StringIO()
    buf.write(_banner(cfg, seed, **extra))
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _write_json(path: Path, cfg, seed, payload: dict):
    data = {"config_hash": config_hash(cfg), "seed": seed, "config": config_echo(cfg), **payload}
    path.write_text(json.dumps(data, indent=2, sort_keys=True))


def gen_data(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    samples = blockage_dataset(cfg, seed)
    ds = out / "blockage.nfds"
    ds.write_bytes(dumps_dataset(samples))
    K = cfg.system.n_ues
    rows = [["sample", "time_s"] + [f"los_available_ue{k}" for k in range(K)]]
    rows += [[i, repr(s.time)] + [int(v) for v in s.labels] for i, s in enumerate(samples)]
    manifest = out / "blockage_manifest.csv"
    manifest.write_text(_csv_text(cfg, seed, rows, file="blockage.nfds"))
    pos = sample_positions(substream(seed, "csi-positions-bs"), cfg.csi.n_samples,
                           cfg.scenario.ue_lo, cfg.scenario.ue_hi)
    prow = [["sample", "x_m", "y_m", "z_m"]] + [[i, *map(repr, map(float, p))]
                                                 for i, p in enumerate(pos)]
    positions = out / "csi_positions.csv"
    positions.write_text(_csv_text(cfg, seed, prow))
    log.info("wrote %d blockage samples and %d CSI positions", len(samples), len(pos))
    return [ds, manifest, positions]


def train_csi(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    system = build_system(cfg.system)
    models = init_phase1(cfg, system, seed)
    losses, summary = {}, {}
    for tag, est in (("bs", models.bs), ("ris", models.ris)):
        log.info("training %s CSI transformer", tag)
        losses[tag] = train_csi_for(cfg, est, seed, tag).losses
        pos = sample_positions(substream(seed, f"csi-eval-{tag}"), cfg.csi.n_samples,
                               cfg.scenario.ue_lo, cfg.scenario.ue_hi)
        held = make_csi_dataset(est.array, cfg.system.wavelength, pos, est.scale)
        summary[f"heldout_nmse_{tag}"] = mean_nmse(est.model.estimate(held.features),
                                                   held.targets)
        save_checkpoint(out / f"csi_{tag}.nfck", est.model.state_dict())
    rows = [["epoch", "loss_bs", "loss_ris"]]
    rows += [[e, repr(a), repr(b)] for e, (a, b) in enumerate(zip(losses["bs"], losses["ris"]))]
    (out / "train_csi_losses.csv").write_text(_csv_text(cfg, seed, rows))
    _write_json(out / "train_csi_summary.json", cfg, seed, {"summary": summary})
    return [out / "csi_bs.nfck", out / "csi_ris.nfck", out / "train_csi_losses.csv"]


def train_vit(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    models = init_phase1(cfg, build_system(cfg.system), seed)
    samples = blockage_dataset(cfg, seed)
    log.info("training blockage ViT on %d samples", len(samples))
    res = train_vit_for(cfg, models.vit, samples, seed)
    save_checkpoint(out / "vit.nfck", models.vit.state_dict())
    x, y = stack_samples(samples)
    _, _, te = split_indices(len(samples), substream(seed, "data-split"))
    rep = classification_metrics(predict(models.vit, x[te]), y[te]) if len(te) else None
    rows = [["epoch", "loss_bce", "val_loss_bce"]]
    vals = res.val_losses or [None] * len(res.losses)
    rows += [[e, repr(a), "" if b is None else repr(b)]
             for e, (a, b) in enumerate(zip(res.losses, vals))]
    (out / "train_vit_losses.csv").write_text(_csv_text(cfg, seed, rows))
    summary = {"best_epoch": res.best_epoch, "test_samples": int(len(te))}
    if rep is not None:
        summary.update(precision=rep.precision, recall=rep.recall, f1=rep.f1)
    _write_json(out / "train_vit_summary.json", cfg, seed, {"summary": summary})
    return [out / "vit.nfck", out / "train_vit_losses.csv"]


def _require_phase1(cfg: ExperimentConfig, system, out: Path):
    try:
        return load_phase1(cfg, system, out)
    except FileNotFoundError as exc:
        raise MissingArtifact(f"{exc}; run --mode train-csi and --mode train-vit first") from exc
    except (KeyError, ValueError) as exc:
        raise MissingArtifact(f"checkpoints in {out} do not fit this configuration: {exc}") from exc


def _run_kind(kind: str, cfg: ExperimentConfig, seed: int, out: Path, models=None):
    system = build_system(cfg.system)
    if kind != "oracle" and models is None:
        models = _require_phase1(cfg, system, out)
    run = run_agent(kind, cfg, system, models, seed, abort_dir=out)
    run.record.write(out, kind, config_echo(cfg))
    s = run.record.summary()
    log.info("%s: mean sum SE %.3f, final window %.3f bps/Hz", kind, s["mean_sum_se"] or 0.0,
             s["final_window_sum_se"] or 0.0)
    return run


def train_hdrl(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    run = _run_kind("hdrl_ris", cfg, seed, out)
    for name, ac in (("hdrl_meta", run.meta), ("hdrl_sub", run.sub)):
        save_checkpoint(out / f"{name}.nfck", ac.state_dict())
    return [out / "hdrl_ris_micro.csv", out / "hdrl_ris_macro.csv"]


def baseline(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    system = build_system(cfg.system)
    models = _require_phase1(cfg, system, out)
    rows = [["kind", "config_hash", "mean_sum_se_bps_hz", "final_window_sum_se_bps_hz",
             "mean_reward_bps_hz", "c1_violations"]]
    for kind in KINDS:
        s = _run_kind(kind, cfg, seed, out, models).record.summary()
        rows.append([kind, s["config_hash"], repr(s["mean_sum_se"]),
                     repr(s["final_window_sum_se"]), repr(s["mean_reward"]),
                     s["c1_violations"]])
    path = out / "baseline_comparison.csv"
    path.write_text(_csv_text(cfg, seed, rows))
    return [path]


def sweep(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    """One run of ``cfg.sweep.pipeline`` per value, collated into ``sweep.csv``.

    Learning pipelines load phase-1 checkpoints from ``out``; they must fit
    every swept array size.
    """
    sw = cfg.sweep
    rows = [["parameter", "value", "config_hash", "n_bs", "n_ris", "p_max_dbm",
             "mean_sum_se_bps_hz", "final_window_sum_se_bps_hz", "mean_reward_bps_hz"]]
    for value in sw.values:
        run_cfg = with_override(cfg, sw.parameter, value)
        sub = out / "sweep" / f"{sw.parameter}={value!r}"
        sub.mkdir(parents=True, exist_ok=True)
        models = None
        if sw.pipeline != "oracle":
            models = _require_phase1(run_cfg, build_system(run_cfg.system), out)
        s = _run_kind(sw.pipeline, run_cfg, seed, sub, models).record.summary()
        rows.append([sw.parameter, repr(value), s["config_hash"], run_cfg.system.n_bs,
                     run_cfg.system.n_ris, repr(run_cfg.system.p_max_dbm),
                     repr(s["mean_sum_se"]), repr(s["final_window_sum_se"]),
                     repr(s["mean_reward"])])
    path = out / "sweep.csv"
    path.write_text(_csv_text(cfg, seed, rows, pipeline=sw.pipeline))
    return [path]


def flops(cfg: ExperimentConfig, seed: int, out: Path) -> list[Path]:
    rows = [["scope"] + report_rows(flop_report_for(cfg))[0]]
    rows += [["config"] + r for r in report_rows(flop_report_for(cfg))[1:]]
    rows += [["reference_scale"] + r
             for r in report_rows(reference_scale_report(), REFERENCE_GFLOPS)[1:]]
    path = out / "flops.csv"
    path.write_text(_csv_text(cfg, seed, rows))
    return [path]


PIPELINES = {
    "gen-data": gen_data,
    "train-csi": train_csi,
    "train-vit": train_vit,
    "train-hdrl": train_hdrl,
    "baseline": baseline,
    "sweep": sweep,
    "flops": flops,
}


def run(cfg: ExperimentConfig, mode: str, out, seed: int | None = None) -> list[Path]:
    if mode not in PIPELINES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    if seed is not None:
        cfg = with_override(cfg, "seed", seed)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    return PIPELINES[mode](cfg, cfg.seed, out)


__all__ = ["CHECKPOINTS", "MODES", "MissingArtifact", "run"]
