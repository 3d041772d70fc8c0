"""Parameterized building blocks: linear layers, multi-head attention,
feed-forward blocks, and the named-parameter registry shared by the
optimizer, checkpointing, and the profiler.

Blocks are pure functions of (inputs, params): construction declares
parameters into a registry under dotted names; ``init_params`` fills
them deterministically from a seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Rng, ShapeError, Tensor, ops

__all__ = [
    "ParamRegistry",
    "AttentionConfig",
    "Linear",
    "LayerNorm",
    "FeedForward",
    "MultiHeadAttention",
    "init_params",
    "set_attention_debug",
    "attention_debug_weights",
]


class ParamRegistry:
    """Ordered map from dotted parameter names to trainable tensors.

    Names are unique; iteration order is insertion order, which makes
    initialization, optimizer traversal, and checkpoint layout
    deterministic.
    """

    def __init__(self):
        self._entries: dict[str, Tensor] = {}
        self._kinds: dict[str, str] = {}

    def declare(self, name: str, shape, kind: str) -> Tensor:
        """Register a parameter placeholder (zeros until init_params).

        kind is one of 'weight' (fan-based init), 'bias' (zeros),
        'gain' (ones).
        """
        if name in self._entries:
            raise ValueError(f"duplicate parameter name {name!r}")
        if kind not in ("weight", "bias", "gain"):
            raise ValueError(f"unknown parameter kind {kind!r}")
        t = Tensor(np.zeros(shape), requires_grad=True)
        self._entries[name] = t
        self._kinds[name] = kind
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def items(self):
        return self._entries.items()

    def kind(self, name: str) -> str:
        return self._kinds[name]

    def total_parameters(self) -> int:
        return int(np.sum([t.size for t in self._entries.values()]))

    def zero_grads(self) -> None:
        for t in self._entries.values():
            t.zero_grad()


def _fans(shape) -> tuple[int, int]:
    """(fan_in, fan_out) for linear [out,in] and conv [out,in,kh,kw] weights."""
    if len(shape) == 2:
        out_dim, in_dim = shape
        return in_dim, out_dim
    if len(shape) == 4:
        out_ch, in_ch, kh, kw = shape
        return in_ch * kh * kw, out_ch * kh * kw
    # fall back to treating the last axis as fan-in
    return shape[-1], int(np.prod(shape[:-1]))


def init_params(registry: ParamRegistry, rng: Rng, scheme: str = "xavier-uniform") -> ParamRegistry:
    """Fill every declared entry: weights per ``scheme``, biases zero, gains one.

    Same seed, same entries -> bitwise-identical values. Each parameter
    draws from its own child stream, so adding a parameter never shifts
    the values of the others.
    """
    if scheme not in ("xavier-uniform", "zeros", "ones"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    for name, tensor in registry.items():
        kind = registry.kind(name)
        if kind == "bias":
            tensor.data = np.zeros(tensor.shape, dtype=tensor.dtype)
        elif kind == "gain":
            tensor.data = np.ones(tensor.shape, dtype=tensor.dtype)
        elif scheme == "zeros":
            tensor.data = np.zeros(tensor.shape, dtype=tensor.dtype)
        elif scheme == "ones":
            tensor.data = np.ones(tensor.shape, dtype=tensor.dtype)
        else:
            fan_in, fan_out = _fans(tensor.shape)
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            tensor.data = rng.child(name).uniform(tensor.shape, -bound, bound)
    return registry


@dataclass
class AttentionConfig:
    model_dim: int
    num_heads: int

    def __post_init__(self):
        if self.model_dim <= 0 or self.num_heads <= 0:
            raise ValueError("model_dim and num_heads must be positive")
        if self.model_dim % self.num_heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


class Linear:
    """y = x @ W^T + b with W declared as [out_dim, in_dim]."""

    def __init__(self, reg: ParamRegistry, name: str, in_dim: int, out_dim: int,
                 bias: bool = True):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = reg.declare(f"{name}.weight", (out_dim, in_dim), "weight")
        self.bias = reg.declare(f"{name}.bias", (out_dim,), "bias") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm:
    def __init__(self, reg: ParamRegistry, name: str, dim: int, eps: float = 1e-5):
        self.gain = reg.declare(f"{name}.gain", (dim,), "gain")
        self.bias = reg.declare(f"{name}.bias", (dim,), "bias")
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class FeedForward:
    """linear(D -> mult*D) -> gelu -> linear(-> D)."""

    def __init__(self, reg: ParamRegistry, name: str, dim: int, hidden_mult: int = 2):
        self.lin1 = Linear(reg, f"{name}.lin1", dim, hidden_mult * dim)
        self.lin2 = Linear(reg, f"{name}.lin2", hidden_mult * dim, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(ops.gelu(self.lin1(x)))


# Debug capture of attention weights, off by default (costs a copy per call).
_ATTN_DEBUG = False
_ATTN_WEIGHTS: list[np.ndarray] = []


def set_attention_debug(enabled: bool) -> None:
    global _ATTN_DEBUG
    _ATTN_DEBUG = enabled
    _ATTN_WEIGHTS.clear()


def attention_debug_weights() -> list[np.ndarray]:
    """Attention weight arrays [B, heads, Lq, Lk] captured since debug was enabled."""
    return list(_ATTN_WEIGHTS)


class MultiHeadAttention:
    """Scaled dot-product attention over full token sets (no masking).

    Per head h: softmax(Q_h K_h^T / sqrt(head_dim)) V_h; heads are
    concatenated and output-projected. Self-attention is the
    kv_in is q_in case.
    """

    def __init__(self, reg: ParamRegistry, name: str, cfg: AttentionConfig):
        self.cfg = cfg
        d = cfg.model_dim
        self.q_proj = Linear(reg, f"{name}.q_proj", d, d)
        self.k_proj = Linear(reg, f"{name}.k_proj", d, d)
        self.v_proj = Linear(reg, f"{name}.v_proj", d, d)
        self.out_proj = Linear(reg, f"{name}.out_proj", d, d)

    def _split_heads(self, x: Tensor, batch: int, length: int) -> Tensor:
        h, hd = self.cfg.num_heads, self.cfg.head_dim
        return ops.transpose(ops.reshape(x, (batch, length, h, hd)), (0, 2, 1, 3))

    def __call__(self, q_in: Tensor, kv_in: Tensor) -> Tensor:
        if q_in.shape[-1] != self.cfg.model_dim or kv_in.shape[-1] != self.cfg.model_dim:
            raise ShapeError(
                f"attention: feature dims {q_in.shape[-1]}/{kv_in.shape[-1]} "
                f"!= model_dim {self.cfg.model_dim}"
            )
        batch, lq, _ = q_in.shape
        lk = kv_in.shape[1]
        q = self._split_heads(self.q_proj(q_in), batch, lq)
        k = self._split_heads(self.k_proj(kv_in), batch, lk)
        v = self._split_heads(self.v_proj(kv_in), batch, lk)
        scale = 1.0 / math.sqrt(self.cfg.head_dim)
        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))), scale)
        weights = ops.softmax(scores, axis=-1)
        if _ATTN_DEBUG:
            _ATTN_WEIGHTS.append(weights.numpy().copy())
        ctx = ops.matmul(weights, v)  # [B, h, Lq, hd]
        merged = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (batch, lq, self.cfg.model_dim))
        return self.out_proj(merged)
