"""Multi-head self-attention and pre-norm encoder blocks."""

from __future__ import annotations

import numpy as np

from .layers import LayerNorm, Linear, Module, ReLU, softmax, softmax_backward, uniform_init


class MultiHeadSelfAttention(Module):
    """Scaled dot-product attention over (B, T, d_model) or (T, d_model) inputs.

    Per-head projections are packed column-wise: head ``i`` owns columns
    ``i*d_k:(i+1)*d_k`` of ``Wq``/``Wk`` and ``i*d_v:(i+1)*d_v`` of ``Wv``.
    No positional information is added here.
    """

    def __init__(self, d_model: int, heads: int, d_k: int, d_v: int, rng: np.random.Generator):
        super().__init__()
        self.d_model, self.h, self.d_k, self.d_v = d_model, heads, d_k, d_v
        self.add_param("Wq", uniform_init(rng, (d_model, heads * d_k), d_model))
        self.add_param("Wk", uniform_init(rng, (d_model, heads * d_k), d_model))
        self.add_param("Wv", uniform_init(rng, (d_model, heads * d_v), d_model))
        self.add_param("Wo", uniform_init(rng, (heads * d_v, d_model), heads * d_v))

    def _split(self, z, width):
        B, T, _ = z.shape
        return z.reshape(B, T, self.h, width).transpose(0, 2, 1, 3)

    def forward(self, x):
        squeeze = x.ndim == 2
        if squeeze:
            x = x[None]
        if x.shape[-1] != self.d_model:
            raise ValueError(f"expected d_model={self.d_model}, got {x.shape[-1]}")
        B, T, _ = x.shape
        p = self.params
        q = self._split(x @ p["Wq"], self.d_k)
        k = self._split(x @ p["Wk"], self.d_k)
        v = self._split(x @ p["Wv"], self.d_v)
        scale = 1.0 / np.sqrt(self.d_k)
        attn = softmax(q @ k.transpose(0, 1, 3, 2) * scale)  # (B, h, T, T)
        heads = attn @ v  # (B, h, T, d_v)
        concat = heads.transpose(0, 2, 1, 3).reshape(B, T, self.h * self.d_v)
        y = concat @ p["Wo"]
        self._cache = (x, q, k, v, attn, concat, squeeze)
        self.last_attention = attn
        return y[0] if squeeze else y

    def backward(self, dy):
        x, q, k, v, attn, concat, squeeze = self._cache
        if squeeze:
            dy = dy[None]
        B, T, _ = x.shape
        p, g = self.params, self.grads
        g["Wo"] += concat.reshape(-1, concat.shape[-1]).T @ dy.reshape(-1, self.d_model)
        dconcat = dy @ p["Wo"].T
        dheads = dconcat.reshape(B, T, self.h, self.d_v).transpose(0, 2, 1, 3)
        dattn = dheads @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dheads
        scale = 1.0 / np.sqrt(self.d_k)
        dscores = softmax_backward(attn, dattn) * scale
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q

        def merge(z):
            return z.transpose(0, 2, 1, 3).reshape(B * T, -1)

        x2 = x.reshape(B * T, -1)
        dq2, dk2, dv2 = merge(dq), merge(dk), merge(dv)
        g["Wq"] += x2.T @ dq2
        g["Wk"] += x2.T @ dk2
        g["Wv"] += x2.T @ dv2
        dx = (dq2 @ p["Wq"].T + dk2 @ p["Wk"].T + dv2 @ p["Wv"].T).reshape(B, T, -1)
        return dx[0] if squeeze else dx


class FeedForward(Module):
    def __init__(self, d_model: int, d_hidden: int, rng: np.random.Generator):
        super().__init__()
        self.fc1 = self.add_child("fc1", Linear(d_model, d_hidden, rng))
        self.act = ReLU()
        self.fc2 = self.add_child("fc2", Linear(d_hidden, d_model, rng))

    def forward(self, x):
        return self.fc2.forward(self.act.forward(self.fc1.forward(x)))

    def backward(self, dy):
        return self.fc1.backward(self.act.backward(self.fc2.backward(dy)))


class EncoderBlock(Module):
    """Pre-norm residual block: x + MHSA(LN(x)), then x + FFN(LN(x))."""

    def __init__(self, d_model: int, heads: int, d_k: int, d_v: int, d_ff: int,
                 rng: np.random.Generator):
        super().__init__()
        self.ln1 = self.add_child("ln1", LayerNorm(d_model))
        self.attn = self.add_child("attn", MultiHeadSelfAttention(d_model, heads, d_k, d_v, rng))
        self.ln2 = self.add_child("ln2", LayerNorm(d_model))
        self.ffn = self.add_child("ffn", FeedForward(d_model, d_ff, rng))

    def forward(self, x):
        x = x + self.attn.forward(self.ln1.forward(x))
        return x + self.ffn.forward(self.ln2.forward(x))

    def backward(self, dy):
        dx = dy + self.ln2.backward(self.ffn.backward(dy))
        return dx + self.ln1.backward(self.attn.backward(dx))


class Encoder(Module):
    def __init__(self, n_layers: int, d_model: int, heads: int, d_k: int, d_v: int, d_ff: int,
                 rng: np.random.Generator):
        super().__init__()
        self.blocks = [self.add_child(str(i), EncoderBlock(d_model, heads, d_k, d_v, d_ff, rng))
                       for i in range(n_layers)]

    def forward(self, x):
        for blk in self.blocks:
            x = blk.forward(x)
        return x

    def backward(self, dy):
        for blk in reversed(self.blocks):
            dy = blk.backward(dy)
        return dy
