"""Shared minibatch Adam loop for the estimators."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..neural import Adam, Module

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    losses: list = field(default_factory=list)  # mean training loss per epoch
    initial_loss: float = float("nan")
    val_losses: list = field(default_factory=list)
    best_epoch: int | None = None  # set when validation data drove model selection


def cosine_lr(lr: float, epoch: int, epochs: int, floor: float = 0.0) -> float:
    return floor + 0.5 * (lr - floor) * (1.0 + np.cos(np.pi * epoch / max(epochs, 1)))


def fit(model: Module, x: np.ndarray, y: np.ndarray, loss_fn, epochs: int, batch: int,
        lr: float, rng: np.random.Generator, schedule: str = "constant",
        val: tuple | None = None) -> TrainResult:
    """Minimize ``loss_fn(model.forward(x), y)`` with Adam over shuffled minibatches.

    ``loss_fn`` returns (value, d value / d prediction).  ``schedule="cosine"``
    anneals the step size from ``lr`` to zero over the run.  With ``val=(x, y)``
    the parameters from the epoch with the lowest validation loss are restored
    at the end.  A non-finite loss raises FloatingPointError naming the epoch
    and batch.
    """
    if schedule not in ("constant", "cosine"):
        raise ValueError(f"unknown schedule {schedule!r}")
    S = x.shape[0]
    if S == 0:
        raise ValueError("empty dataset")
    opt = Adam(model, lr=lr)
    result = TrainResult()
    result.initial_loss = loss_fn(model.forward(x), y)[0]
    best = None
    for epoch in range(epochs):
        if schedule == "cosine":
            opt.lr = cosine_lr(lr, epoch, epochs)
        order = rng.permutation(S)
        total = 0.0
        for start in range(0, S, batch):
            idx = order[start:start + batch]
            opt.zero_grad()
            loss, grad = loss_fn(model.forward(x[idx]), y[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss at epoch {epoch}, batch starting {start}: {loss}")
            model.backward(grad)
            opt.step()
            total += loss * len(idx)
        result.losses.append(total / S)
        log.debug("epoch %d loss %.6g", epoch, result.losses[-1])
        if val is not None:
            v = loss_fn(model.forward(val[0]), val[1])[0]
            result.val_losses.append(v)
            if best is None or v < best[0]:
                best = (v, epoch, model.state_dict())
    if best is not None:
        model.load_state_dict(best[2])
        result.best_epoch = best[1]
    return result
