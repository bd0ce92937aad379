"""Gated recurrent unit, batched forward and backpropagation through time.

Gate convention::

    z  = sigmoid(W_z x + U_z h + b_z)
    r  = sigmoid(W_r x + U_r h + b_r)
    hc = tanh(W_h x + U_h (r * h) + b_h)
    h' = z * h + (1 - z) * hc
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class GruParams:
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    NAMES = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")

    @property
    def input_dim(self) -> int:
        return self.W_z.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_z.shape[0]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "GruParams":
        H, D = hidden_dim, input_dim
        return cls(*(np.zeros((H, D)) for _ in range(3)),
                   *(np.zeros((H, H)) for _ in range(3)),
                   *(np.zeros(H) for _ in range(3)))


def gru_step(x: np.ndarray, h: np.ndarray, p: GruParams) -> np.ndarray:
    """One GRU update for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.shape != (p.input_dim,) or h.shape != (p.hidden_dim,):
        raise DimensionMismatchError(
            f"gru_step expects x of {p.input_dim} and h of {p.hidden_dim}, got {x.shape}, {h.shape}")
    z = sigmoid(p.W_z @ x + p.U_z @ h + p.b_z)
    r = sigmoid(p.W_r @ x + p.U_r @ h + p.b_r)
    hc = np.tanh(p.W_h @ x + p.U_h @ (r * h) + p.b_h)
    return z * h + (1.0 - z) * hc


@dataclass
class GruCache:
    X: np.ndarray  # (B, T, D)
    hs: np.ndarray  # (B, T + 1, H); hs[:, 0] is the zero initial state
    z: np.ndarray  # (B, T, H)
    r: np.ndarray
    hc: np.ndarray


def gru_forward(X: np.ndarray, p: GruParams) -> tuple[np.ndarray, GruCache]:
    """Run the GRU over a batch of sequences from a zero initial state.

    Returns hidden states of shape (B, T, H) and the cache for :func:`gru_backward`.
    """
    B, T, D = X.shape
    if D != p.input_dim:
        raise DimensionMismatchError(f"feature dimension {D} != GRU input_dim {p.input_dim}")
    H = p.hidden_dim
    hs = np.zeros((B, T + 1, H))
    z = np.empty((B, T, H))
    r = np.empty((B, T, H))
    hc = np.empty((B, T, H))
    # input projections for every step at once
    xz = X @ p.W_z.T + p.b_z
    xr = X @ p.W_r.T + p.b_r
    xh = X @ p.W_h.T + p.b_h
    for t in range(T):
        h = hs[:, t]
        z[:, t] = sigmoid(xz[:, t] + h @ p.U_z.T)
        r[:, t] = sigmoid(xr[:, t] + h @ p.U_r.T)
        hc[:, t] = np.tanh(xh[:, t] + (r[:, t] * h) @ p.U_h.T)
        hs[:, t + 1] = z[:, t] * h + (1.0 - z[:, t]) * hc[:, t]
    return hs[:, 1:], GruCache(X, hs, z, r, hc)


def gru_backward(dhs: np.ndarray, cache: GruCache, p: GruParams) -> GruParams:
    """Gradients of the loss w.r.t. GRU parameters given dL/dh_t for every step."""
    X, hs, z, r, hc = cache.X, cache.hs, cache.z, cache.r, cache.hc
    B, T, _ = X.shape
    g = GruParams.zeros(p.input_dim, p.hidden_dim)
    # pre-activation gradients collected per step, contracted with inputs at the end
    da_z = np.empty_like(z)
    da_r = np.empty_like(r)
    da_h = np.empty_like(hc)
    carry = np.zeros((B, p.hidden_dim))
    for t in reversed(range(T)):
        dh = dhs[:, t] + carry
        h_prev = hs[:, t]
        zt, rt, hct = z[:, t], r[:, t], hc[:, t]
        dz = dh * (h_prev - hct)
        dhc = dh * (1.0 - zt)
        carry = dh * zt
        da_h[:, t] = dhc * (1.0 - hct * hct)
        drh = da_h[:, t] @ p.U_h
        carry += drh * rt
        da_r[:, t] = drh * h_prev * rt * (1.0 - rt)
        da_z[:, t] = dz * zt * (1.0 - zt)
        carry += da_z[:, t] @ p.U_z + da_r[:, t] @ p.U_r
        g.U_h += da_h[:, t].T @ (rt * h_prev)
        g.U_z += da_z[:, t].T @ h_prev
        g.U_r += da_r[:, t].T @ h_prev
    g.W_z = np.einsum("bth,btd->hd", da_z, X)
    g.W_r = np.einsum("bth,btd->hd", da_r, X)
    g.W_h = np.einsum("bth,btd->hd", da_h, X)
    g.b_z = da_z.sum(axis=(0, 1))
    g.b_r = da_r.sum(axis=(0, 1))
    g.b_h = da_h.sum(axis=(0, 1))
    return g
