"""Central finite-difference gradient checks."""

from __future__ import annotations

import numpy as np


def numerical_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of scalar ``f`` at ``x``; ``x`` is perturbed in place and restored."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Worst entrywise |a - n| / max(|a|, |n|, floor * scale), scale = 1 + max |n|."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = 1.0 + float(np.max(np.abs(n))) if n.size else 1.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor * scale)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def grad_check(f, x: np.ndarray, analytic: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between ``analytic`` and central differences of ``f`` at ``x``."""
    return relative_error(analytic, numerical_gradient(f, x, h))


def check_module(module, x: np.ndarray, rng: np.random.Generator, h: float = 1e-5) -> dict:
    """Check input and parameter gradients of ``module`` under a random linear readout.

    Returns {"input": err, "<param name>": err, ...}.
    """
    y = module.forward(x)
    r = rng.standard_normal(y.shape)

    def loss(_=None):
        return float(np.sum(module.forward(x) * r))

    module.zero_grad()
    module.forward(x)
    dx = module.backward(r)
    errors = {"input": grad_check(loss, x, dx, h)}
    for name, p, g in list(module.named_parameters()):
        errors[name] = grad_check(loss, p, g.copy(), h)
    return errors
