"""DDPG building blocks, the link environment and the two-timescale control loop."""

from .hdrl import KINDS, TrainingAborted, meta_reward, run_agent, run_baseline, train_hdrl

__all__ = ["KINDS", "TrainingAborted", "meta_reward", "run_agent", "run_baseline", "train_hdrl"]
