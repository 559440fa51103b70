"""Layers with hand-written backward passes.

Every module caches what it needs in ``forward`` and, in ``backward``,
accumulates parameter gradients into ``self.grads`` and returns the
gradient with respect to its input.  Inputs may carry any number of
leading batch dimensions unless a layer says otherwise.
"""

from __future__ import annotations

import numpy as np


class Module:
    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.children: dict[str, Module] = {}

    def add_param(self, name: str, value: np.ndarray) -> np.ndarray:
        value = np.ascontiguousarray(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def add_child(self, name: str, module: "Module") -> "Module":
        self.children[name] = module
        return module

    def named_parameters(self, prefix: str = ""):
        """Yield (name, param, grad) triples, depth-first, in insertion order."""
        for name, p in self.params.items():
            yield prefix + name, p, self.grads[name]
        for cname, child in self.children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self):
        return [(p, g) for _, p, g in self.named_parameters()]

    def zero_grad(self):
        for _, _, g in self.named_parameters():
            g.fill(0.0)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p, _ in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = {name: p for name, p, _ in self.named_parameters()}
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, p in own.items():
            if state[name].shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p[...] = state[name]

    def n_params(self) -> int:
        return sum(p.size for _, p, _ in self.named_parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.d_in, self.d_out = d_in, d_out
        self.add_param("W", uniform_init(rng, (d_in, d_out), d_in))
        self.has_bias = bias
        if bias:
            self.add_param("b", uniform_init(rng, (d_out,), d_in))

    def forward(self, x):
        if x.shape[-1] != self.d_in:
            raise ValueError(f"expected last dim {self.d_in}, got {x.shape[-1]}")
        self._x = x
        y = x @ self.params["W"]
        if self.has_bias:
            y = y + self.params["b"]
        return y

    def backward(self, dy):
        x = self._x
        x2 = x.reshape(-1, self.d_in)
        dy2 = dy.reshape(-1, self.d_out)
        self.grads["W"] += x2.T @ dy2
        if self.has_bias:
            self.grads["b"] += dy2.sum(axis=0)
        return dy @ self.params["W"].T


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.add_param("gain", np.ones(d))
        self.add_param("shift", np.zeros(d))

    def forward(self, x):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc**2).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = xc * inv
        self._cache = (xhat, inv)
        return xhat * self.params["gain"] + self.params["shift"]

    def backward(self, dy):
        xhat, inv = self._cache
        d = xhat.shape[-1]
        self.grads["gain"] += (dy * xhat).reshape(-1, d).sum(axis=0)
        self.grads["shift"] += dy.reshape(-1, d).sum(axis=0)
        g = dy * self.params["gain"]
        return inv * (g - g.mean(axis=-1, keepdims=True)
                      - xhat * (g * xhat).mean(axis=-1, keepdims=True))


def softmax(x, axis: int = -1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y, dy, axis: int = -1):
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


class Softmax(Module):
    def forward(self, x):
        self._y = softmax(x)
        return self._y

    def backward(self, dy):
        return softmax_backward(self._y, dy)


class ReLU(Module):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class Sigmoid(Module):
    def forward(self, x):
        self._y = sigmoid(x)
        return self._y

    def backward(self, dy):
        return dy * self._y * (1.0 - self._y)


class Tanh(Module):
    def forward(self, x):
        self._y = np.tanh(x)
        return self._y

    def backward(self, dy):
        return dy * (1.0 - self._y**2)


class Identity(Module):
    def forward(self, x):
        return x

    def backward(self, dy):
        return dy


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x):
    return np.maximum(x, 0.0)


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        self.layers = list(layers)
        for i, layer in enumerate(self.layers):
            self.add_child(str(i), layer)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, dy):
        for layer in reversed(self.layers):
            dy = layer.backward(dy)
        return dy


class Conv1d(Module):
    """Stride-1 'same' convolution over the token axis of (B, T, c_in) inputs.

    The kernel is stored as (k * c_in, c_out) with taps ordered oldest-offset first,
    so tap ``j`` reads token ``t + j - (k-1)//2``.  ``k`` must be odd.
    """

    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator):
        super().__init__()
        if k % 2 != 1:
            raise ValueError("kernel size must be odd for same padding")
        self.c_in, self.c_out, self.k = c_in, c_out, k
        self.add_param("W", uniform_init(rng, (k * c_in, c_out), k * c_in))
        self.add_param("b", uniform_init(rng, (c_out,), k * c_in))

    def _windows(self, x):
        B, T, C = x.shape
        pad = (self.k - 1) // 2
        xp = np.zeros((B, T + 2 * pad, C))
        xp[:, pad:pad + T] = x
        return np.concatenate([xp[:, j:j + T] for j in range(self.k)], axis=-1)

    def forward(self, x):
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.shape[-1] != self.c_in:
            raise ValueError(f"expected {self.c_in} channels, got {x.shape[-1]}")
        cols = self._windows(x)
        self._cache = (cols, x.shape, squeeze)
        y = cols @ self.params["W"] + self.params["b"]
        return y[0] if squeeze else y

    def backward(self, dy):
        cols, (B, T, C), squeeze = self._cache
        if squeeze:
            dy = dy[None]
        self.grads["W"] += cols.reshape(-1, cols.shape[-1]).T @ dy.reshape(-1, self.c_out)
        self.grads["b"] += dy.reshape(-1, self.c_out).sum(axis=0)
        dcols = dy @ self.params["W"].T  # (B, T, k*C)
        pad = (self.k - 1) // 2
        dxp = np.zeros((B, T + 2 * pad, C))
        for j in range(self.k):
            dxp[:, j:j + T] += dcols[..., j * C:(j + 1) * C]
        dx = dxp[:, pad:pad + T]
        return dx[0] if squeeze else dx
