"""Train phase-1 models on the smoke config, then compare the controllers briefly.

Ten episodes is far too short for the learners to settle; the numbers only
show that every pipeline runs end to end.
"""

from pathlib import Path

from nearfield_ris.config import parse_config
from nearfield_ris.control import KINDS, run_agent
from nearfield_ris.control.env import build_system
from nearfield_ris.estimators.phase1 import train_phase1

cfg = parse_config((Path(__file__).resolve().parents[1] / "configs" / "smoke.json").read_text())
system = build_system(cfg.system)
models = train_phase1(cfg, system, cfg.seed)

print(f"{'kind':<14}{'mean SE':>10}{'final window':>14}")
for kind in KINDS:
    s = run_agent(kind, cfg, system, models, cfg.seed).record.summary()
    print(f"{kind:<14}{s['mean_sum_se']:>10.3f}{s['final_window_sum_se']:>14.3f}")
