"""Closed-form beamformers on a small link, and what the constraints do to a raw action."""

import numpy as np

from nearfield_ris.config import ExperimentConfig
from nearfield_ris.control.env import build_system, decode_sub_action, oracle_step
from nearfield_ris.metrics import link_report

cfg = ExperimentConfig()
system = build_system(cfg.system)
ues = np.array([[20.0, -4.0, 1.5], [28.0, 6.0, 1.5]])
channels = system.channels(ues)

# one user: blocking its direct path costs 30 dB unless the RIS path is better
single = system.channels(ues[:1])
for blocked in ([0], [1]):
    step = oracle_step(system, single, np.array(blocked))
    print(f"K=1 blocked={blocked}  mode={step.modes.tolist()}  SE {step.report.sum_se:.2f} bps/Hz")

# two users under matched filtering are interference-limited, so a common
# 30 dB drop on one user's channel cancels out of both SINRs
for blocked in ([0, 0], [1, 0]):
    step = oracle_step(system, channels, np.array(blocked))
    print(f"blocked={blocked}  modes={step.modes.tolist()}  per-UE SE "
          f"{np.round(step.report.se, 2).tolist()}  sum {step.report.sum_se:.2f} bps/Hz")

# any actor output in [-1, 1] decodes to a feasible precoder and unit-modulus phases
rng = np.random.default_rng(0)
N, M, K = system.N, system.M, 2
raw = rng.uniform(-1, 1, 2 * N * K + M)
act = decode_sub_action(raw, N, K, M, system.p_max)
print(f"power {np.sum(np.abs(act.W) ** 2):.4f} W of {system.p_max:.4f} W, "
      f"max |e^(j phi)| - 1 = {np.max(np.abs(np.abs(np.exp(1j * act.phases)) - 1)):.1e}")
rep = link_report(channels.effective(act.phases, np.ones(K), None), act.W, system.noise)
print(f"random action sum SE {rep.sum_se:.2f} bps/Hz")
