"""Additive attention pooling over a hidden-state sequence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError, EmptyInputError


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class AttentionParams:
    W_a: np.ndarray  # (A, H)
    b_a: np.ndarray  # (A,)
    v_a: np.ndarray  # (A,)

    NAMES = ("W_a", "b_a", "v_a")

    @property
    def width(self) -> int:
        return self.W_a.shape[0]

    @classmethod
    def zeros(cls, hidden_dim: int, width: int) -> "AttentionParams":
        return cls(np.zeros((width, hidden_dim)), np.zeros(width), np.zeros(width))


def attention(hs, p: AttentionParams) -> tuple[np.ndarray, np.ndarray]:
    """Score ``v_a . tanh(W_a h_t + b_a)`` per step, softmax, and pool.

    Returns ``(context, weights)`` for a single (T, H) sequence.
    """
    hs = np.asarray(hs, dtype=np.float64)
    if hs.ndim != 2 or hs.shape[0] == 0:
        raise EmptyInputError("attention needs at least one hidden state")
    context, weights, _ = attention_forward(hs[None], p)
    return context[0], weights[0]


def attention_forward(hs: np.ndarray, p: AttentionParams):
    """Batched version over (B, T, H); returns context, weights and a cache."""
    if hs.shape[-1] != p.W_a.shape[1]:
        raise DimensionMismatchError(f"hidden size {hs.shape[-1]} != attention input {p.W_a.shape[1]}")
    u = np.tanh(hs @ p.W_a.T + p.b_a)  # (B, T, A)
    scores = u @ p.v_a  # (B, T)
    weights = softmax(scores, axis=1)
    context = np.einsum("bt,bth->bh", weights, hs)
    return context, weights, (hs, u, weights)


def attention_backward(dcontext: np.ndarray, cache, p: AttentionParams) -> tuple[np.ndarray, AttentionParams]:
    """Returns dL/dhs (B, T, H) and parameter gradients."""
    hs, u, weights = cache
    dweights = np.einsum("bh,bth->bt", dcontext, hs)
    dhs = weights[:, :, None] * dcontext[:, None, :]
    dscores = weights * (dweights - np.sum(weights * dweights, axis=1, keepdims=True))
    du = dscores[:, :, None] * p.v_a
    dpre = du * (1.0 - u * u)
    dhs += dpre @ p.W_a
    grads = AttentionParams(
        W_a=np.einsum("bta,bth->ah", dpre, hs),
        b_a=dpre.sum(axis=(0, 1)),
        v_a=np.einsum("bt,bta->a", dscores, u),
    )
    return dhs, grads
