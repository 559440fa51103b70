"""Minimal double-precision network pieces with hand-derived gradients."""

from .attention import Encoder, EncoderBlock, FeedForward, MultiHeadSelfAttention
from .checks import check_module, grad_check, numerical_gradient, relative_error
from .io import dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from .layers import (
    Conv1d,
    Identity,
    LayerNorm,
    Linear,
    Module,
    ReLU,
    Sequential,
    Sigmoid,
    Softmax,
    Tanh,
    relu,
    sigmoid,
    softmax,
    softmax_backward,
)
from .losses import bce_loss, mse_loss
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Adam", "AdamState", "Conv1d", "Encoder", "EncoderBlock", "FeedForward", "Identity",
    "LayerNorm", "Linear", "Module", "MultiHeadSelfAttention", "ReLU", "Sequential", "Sigmoid",
    "Softmax", "Tanh", "adam_step", "bce_loss", "check_module", "dumps_checkpoint",
    "grad_check", "load_checkpoint", "loads_checkpoint", "mse_loss", "numerical_gradient",
    "relative_error", "relu", "save_checkpoint", "sigmoid", "softmax", "softmax_backward",
]
