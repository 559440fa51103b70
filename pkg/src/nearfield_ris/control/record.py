"""Append-only run logs: per-micro-step and per-macro-step CSV streams plus a JSON summary."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MICRO_FIELDS = [
    ("episode", ""), ("macro", ""), ("micro", ""), ("step", ""),
    ("reward", "bps_hz"), ("sum_se", "bps_hz"), ("qos_penalty", "bps_hz"),
    ("min_slack", "bps_hz"), ("power", "w"), ("power_limit", "w"),
    ("max_modulus_error", ""),
]
MACRO_FIELDS = [
    ("episode", ""), ("macro", ""), ("subgoal", "bits"), ("predicted_blockage", "prob"),
    ("meta_reward", "bps_hz"),
]


def _header(fields, per_ue: list[tuple[str, str]] = ()) -> list[str]:
    cols = [f"{n}_{u}" if u else n for n, u in fields]
    return cols + [f"{n}_{u}" for n, u in per_ue]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    kind: str
    K: int
    micro: list = field(default_factory=list)  # dicts keyed by MICRO_FIELDS names + se, slack
    macro: list = field(default_factory=list)
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def log_micro(self, **row):
        self.micro.append(row)

    def log_macro(self, **row):
        self.macro.append(row)

    def micro_csv(self) -> str:
        ue_cols = [(f"se_ue{k}", "bps_hz") for k in range(self.K)]
        ue_cols += [(f"slack_ue{k}", "bps_hz") for k in range(self.K)]
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash} seed={self.seed} kind={self.kind}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_header(MICRO_FIELDS, ue_cols))
        for r in self.micro:
            w.writerow([_fmt(r[n]) for n, _ in MICRO_FIELDS]
                       + [_fmt(x) for x in r["se"]] + [_fmt(x) for x in r["slack"]])
        return buf.getvalue()

    def macro_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash} seed={self.seed} kind={self.kind}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_header(MACRO_FIELDS))
        for r in self.macro:
            w.writerow([_fmt(r["episode"]), _fmt(r["macro"]),
                        "".join(str(int(b)) for b in r["subgoal"]),
                        " ".join(_fmt(p) for p in r["predicted_blockage"]),
                        _fmt(r["meta_reward"])])
        return buf.getvalue()

    def episodes(self) -> int:
        return 1 + max((r["episode"] for r in self.micro), default=-1)

    def episode_sum_se(self) -> np.ndarray:
        """Mean per-step sum SE of each episode."""
        E = self.episodes()
        tot = np.zeros(E)
        cnt = np.zeros(E)
        for r in self.micro:
            tot[r["episode"]] += r["sum_se"]
            cnt[r["episode"]] += 1
        return tot / np.maximum(cnt, 1)

    def final_window_sum_se(self, fraction: float = 0.1) -> float:
        per = self.episode_sum_se()
        if per.size == 0:
            return float("nan")
        n = max(1, int(round(fraction * per.size)))
        return float(per[-n:].mean())

    def summary(self) -> dict:
        """Statistics recomputable from the streams (wall time excepted)."""
        rewards = np.array([r["reward"] for r in self.micro])
        se = np.array([r["sum_se"] for r in self.micro])
        per = self.episode_sum_se()
        half = per.size // 2
        trend = bool(per[half:].mean() >= per[:half].mean()) if half else None
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "kind": self.kind,
            "micro_steps": len(self.micro),
            "macro_steps": len(self.macro),
            "episodes": int(per.size),
            "mean_reward": float(rewards.mean()) if rewards.size else None,
            "mean_sum_se": float(se.mean()) if se.size else None,
            "final_window_sum_se": self.final_window_sum_se() if per.size else None,
            "reward_trend_nondecreasing": trend,
            "c1_violations": int(sum(r["power"] > r["power_limit"] + 1e-12 for r in self.micro)),
            "max_modulus_error": max((r["max_modulus_error"] for r in self.micro), default=0.0),
            **self.extra,
        }

    def summary_json(self, config_echo: dict | None = None) -> str:
        data = {"summary": self.summary(), "wall_time_s": self.wall_time_s}
        if config_echo is not None:
            data["config"] = config_echo
        return json.dumps(data, indent=2, sort_keys=True)

    def write(self, directory, stem: str, config_echo: dict | None = None):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{stem}_micro.csv").write_text(self.micro_csv())
        (d / f"{stem}_macro.csv").write_text(self.macro_csv())
        (d / f"{stem}_summary.json").write_text(self.summary_json(config_echo))
