"""Bidirectional LSTM sentence encoder and a toy-scale trainer for it.

The encoder output is the concatenation of the final hidden states of a
left-to-right and a right-to-left single-layer LSTM.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..errors import DimensionMismatchError, EmptyInputError
from .adam import AdamState, adam_step
from .attention import softmax
from .gru import sigmoid

_GATES = ("i", "f", "o", "g")


@dataclass
class LstmParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_o: np.ndarray
    U_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    NAMES = tuple(f"{k}_{g}" for k in "WUb" for g in _GATES)

    @property
    def input_dim(self) -> int:
        return self.W_i.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W_i.shape[0]

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmParams":
        H, D = hidden_dim, input_dim
        return cls(*(np.zeros((H, D)) for _ in _GATES), *(np.zeros((H, H)) for _ in _GATES),
                   *(np.zeros(H) for _ in _GATES))

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for n in self.NAMES:
            yield n, getattr(self, n)

    def map(self, fn, *others: "LstmParams") -> "LstmParams":
        return LstmParams(*(fn(getattr(self, n), *(getattr(o, n) for o in others)) for n in self.NAMES))


@dataclass
class BiLstmParams:
    forward: LstmParams
    backward: LstmParams

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for prefix, part in (("fwd", self.forward), ("bwd", self.backward)):
            for n, a in part.tensors():
                yield f"{prefix}.{n}", a

    def map(self, fn, *others: "BiLstmParams") -> "BiLstmParams":
        return BiLstmParams(self.forward.map(fn, *(o.forward for o in others)),
                            self.backward.map(fn, *(o.backward for o in others)))

    def zeros_like(self) -> "BiLstmParams":
        return self.map(np.zeros_like)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "BiLstmParams":
        return cls(LstmParams.zeros(input_dim, hidden_dim), LstmParams.zeros(input_dim, hidden_dim))


def init_bilstm(input_dim: int, hidden_dim: int, seed: int = 0, scale: float = 0.08) -> BiLstmParams:
    rng = np.random.default_rng(seed)
    p = BiLstmParams.zeros(input_dim, hidden_dim)
    for name, arr in p.tensors():
        if ".b_" not in name:
            arr[...] = rng.uniform(-scale, scale, size=arr.shape)
    return p


def _lstm_run(xs: np.ndarray, p: LstmParams):
    T = xs.shape[0]
    H = p.hidden_dim
    h = np.zeros((T + 1, H))
    c = np.zeros((T + 1, H))
    gates = {k: np.empty((T, H)) for k in _GATES}
    for t in range(T):
        x, hp = xs[t], h[t]
        i = sigmoid(p.W_i @ x + p.U_i @ hp + p.b_i)
        f = sigmoid(p.W_f @ x + p.U_f @ hp + p.b_f)
        o = sigmoid(p.W_o @ x + p.U_o @ hp + p.b_o)
        g = np.tanh(p.W_g @ x + p.U_g @ hp + p.b_g)
        c[t + 1] = f * c[t] + i * g
        h[t + 1] = o * np.tanh(c[t + 1])
        for k, v in zip(_GATES, (i, f, o, g)):
            gates[k][t] = v
    return h, c, gates


def _lstm_back(dh_final: np.ndarray, xs: np.ndarray, p: LstmParams, h, c, gates) -> LstmParams:
    T = xs.shape[0]
    grad = LstmParams.zeros(p.input_dim, p.hidden_dim)
    dh = dh_final.copy()
    dc = np.zeros_like(dh)
    for t in reversed(range(T)):
        i, f, o, g = (gates[k][t] for k in _GATES)
        tc = np.tanh(c[t + 1])
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        da = {
            "i": dc * g * i * (1.0 - i),
            "f": dc * c[t] * f * (1.0 - f),
            "o": do * o * (1.0 - o),
            "g": dc * i * (1.0 - g * g),
        }
        dc = dc * f
        dh = np.zeros_like(dh)
        for k in _GATES:
            getattr(grad, f"W_{k}")[...] += np.outer(da[k], xs[t])
            getattr(grad, f"U_{k}")[...] += np.outer(da[k], h[t])
            getattr(grad, f"b_{k}")[...] += da[k]
            dh += getattr(p, f"U_{k}").T @ da[k]
    return grad


def _check(xs, p: BiLstmParams) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise EmptyInputError("bilstm_forward needs a nonempty sequence")
    if xs.shape[1] != p.forward.input_dim or p.backward.input_dim != p.forward.input_dim:
        raise DimensionMismatchError(f"input dimension {xs.shape[1]} != LSTM input_dim {p.forward.input_dim}")
    return xs


def bilstm_forward(xs, p: BiLstmParams) -> np.ndarray:
    """Encode a (T, D) sequence as ``[h_fwd_T ; h_bwd_1]`` of length 2H."""
    xs = _check(xs, p)
    hf, _, _ = _lstm_run(xs, p.forward)
    hb, _, _ = _lstm_run(xs[::-1], p.backward)
    return np.concatenate([hf[-1], hb[-1]])


def bilstm_backward(xs, p: BiLstmParams, dout: np.ndarray) -> BiLstmParams:
    """Parameter gradients given dL/d(encoder output)."""
    xs = _check(xs, p)
    H = p.forward.hidden_dim
    rev = xs[::-1]
    gf = _lstm_back(dout[:H], xs, p.forward, *_lstm_run(xs, p.forward))
    gb = _lstm_back(dout[H:], rev, p.backward, *_lstm_run(rev, p.backward))
    return BiLstmParams(gf, gb)


# --------------------------------------------------------------------------
# toy trainer: encoder + softmax head on labeled sentences


@dataclass
class SentimentModel:
    encoder: BiLstmParams
    W_c: np.ndarray  # (C, 2H)
    b_c: np.ndarray  # (C,)

    def tensors(self):
        yield from self.encoder.tensors()
        yield "W_c", self.W_c
        yield "b_c", self.b_c

    def map(self, fn, *others: "SentimentModel") -> "SentimentModel":
        return SentimentModel(self.encoder.map(fn, *(o.encoder for o in others)),
                              fn(self.W_c, *(o.W_c for o in others)),
                              fn(self.b_c, *(o.b_c for o in others)))

    def zeros_like(self) -> "SentimentModel":
        return self.map(np.zeros_like)

    def predict_proba(self, xs) -> np.ndarray:
        return softmax(self.W_c @ bilstm_forward(xs, self.encoder) + self.b_c)


def sentiment_loss_and_gradients(model: SentimentModel, batch: Sequence[tuple[np.ndarray, int]]):
    """Mean cross-entropy of the head over ``(token_vectors, label)`` pairs."""
    if not batch:
        raise EmptyInputError("empty batch")
    grads = model.zeros_like()
    total = 0.0
    for xs, label in batch:
        enc = bilstm_forward(xs, model.encoder)
        probs = softmax(model.W_c @ enc + model.b_c)
        total -= np.log(probs[label])
        dlogits = probs.copy()
        dlogits[label] -= 1.0
        grads.W_c += np.outer(dlogits, enc)
        grads.b_c += dlogits
        g_enc = bilstm_backward(xs, model.encoder, model.W_c.T @ dlogits)
        grads.encoder = grads.encoder.map(np.add, g_enc)
    n = len(batch)
    return total / n, grads.map(lambda a: a / n)


def train_sentiment_encoder(sequences: Sequence[np.ndarray], labels: Sequence[int], hidden_dim: int,
                            n_classes: int = 2, epochs: int = 50, batch_size: int = 16,
                            learning_rate: float = 0.01, seed: int = 0) -> SentimentModel:
    """Fit a bi-LSTM encoder with a softmax head on small labeled data.

    Meant for toy corpora and tests; the encoder half is what the
    sentiment feature provider consumes.
    """
    if len(sequences) != len(labels) or not sequences:
        raise EmptyInputError("need equally many sequences and labels, at least one")
    D = np.asarray(sequences[0]).shape[1]
    rng = np.random.default_rng(seed)
    model = SentimentModel(init_bilstm(D, hidden_dim, seed),
                           rng.uniform(-0.08, 0.08, size=(n_classes, 2 * hidden_dim)),
                           np.zeros(n_classes))
    state = AdamState.for_params(model, learning_rate)
    data = list(zip(sequences, labels))
    for _ in range(epochs):
        order = rng.permutation(len(data))
        for start in range(0, len(data), batch_size):
            batch = [data[i] for i in order[start:start + batch_size]]
            _, grads = sentiment_loss_and_gradients(model, batch)
            model, state = adam_step(model, grads, state)
    return model
