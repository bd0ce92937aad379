"""Window classifier: GRU -> additive attention -> [context; genre] -> softmax over LOW/MED/HIGH."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import DimensionMismatchError, EmptyInputError, InvalidEpsilonError, ValidationError
from .attention import AttentionParams, attention_backward, attention_forward, softmax
from .gru import GruParams, gru_backward, gru_forward

N_CLASSES = 3
INIT_SCALE = 0.08


@dataclass
class OutputParams:
    W_o: np.ndarray  # (3, H + G)
    b_o: np.ndarray  # (3,)

    NAMES = ("W_o", "b_o")


@dataclass
class ModelParams:
    gru: GruParams
    attention: AttentionParams
    output: OutputParams
    rng_seed: int = 0

    @property
    def input_dim(self) -> int:
        return self.gru.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.gru.hidden_dim

    @property
    def attention_dim(self) -> int:
        return self.attention.width

    @property
    def genre_dim(self) -> int:
        return self.output.W_o.shape[1] - self.hidden_dim

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        """All parameter arrays in a fixed order (the on-disk order)."""
        for part in (self.gru, self.attention, self.output):
            for name in part.NAMES:
                yield name, getattr(part, name)

    def map(self, fn: Callable[..., np.ndarray], *others: "ModelParams") -> "ModelParams":
        """New params with ``fn(self_tensor, *other_tensors)`` applied tensor-wise."""
        def part(kind, attr):
            mine = getattr(self, attr)
            theirs = [getattr(o, attr) for o in others]
            return kind(*(fn(getattr(mine, n), *(getattr(t, n) for t in theirs)) for n in kind.NAMES))
        return ModelParams(part(GruParams, "gru"), part(AttentionParams, "attention"),
                           part(OutputParams, "output"), self.rng_seed)

    def copy(self) -> "ModelParams":
        return self.map(np.copy)

    def zeros_like(self) -> "ModelParams":
        return self.map(np.zeros_like)

    def check(self) -> None:
        H, A = self.hidden_dim, self.attention_dim
        ok = (self.attention.W_a.shape == (A, H) and self.output.W_o.shape[0] == N_CLASSES
              and self.output.b_o.shape == (N_CLASSES,) and self.genre_dim >= 0)
        if not ok:
            raise DimensionMismatchError("inconsistent model shapes")


def zero_model(input_dim: int, hidden_dim: int, genre_dim: int, attention_dim: int | None = None,
               seed: int = 0) -> ModelParams:
    A = hidden_dim if attention_dim is None else attention_dim
    return ModelParams(
        GruParams.zeros(input_dim, hidden_dim),
        AttentionParams.zeros(hidden_dim, A),
        OutputParams(np.zeros((N_CLASSES, hidden_dim + genre_dim)), np.zeros(N_CLASSES)),
        seed,
    )


def init_model(input_dim: int, hidden_dim: int, genre_dim: int, attention_dim: int | None = None,
               seed: int = 0) -> ModelParams:
    """Weights uniform in (-0.08, 0.08) from ``seed``; biases zero."""
    rng = np.random.default_rng(seed)
    m = zero_model(input_dim, hidden_dim, genre_dim, attention_dim, seed)
    for name, arr in m.tensors():
        if not name.startswith("b_"):
            arr[...] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=arr.shape)
    return m


@dataclass
class _Cache:
    gru: object
    att: object
    hs: np.ndarray
    q: np.ndarray
    mask: np.ndarray | None
    probs: np.ndarray


def forward(m: ModelParams, X: np.ndarray, genres: np.ndarray, masks: np.ndarray | None = None):
    """Batched forward pass. X is (B, T, D), genres (B, G), masks (B, H + G) or None.

    Masks are multiplicative, already carrying the inverted-dropout scale.
    """
    if X.ndim != 3 or X.shape[2] != m.input_dim:
        raise DimensionMismatchError(f"window features must be (B, T, {m.input_dim}), got {X.shape}")
    if genres.shape != (X.shape[0], m.genre_dim):
        raise DimensionMismatchError(f"genre vector must have {m.genre_dim} entries, got {genres.shape}")
    if X.shape[1] == 0:
        raise EmptyInputError("empty window")
    hs, gcache = gru_forward(X, m.gru)
    context, _, acache = attention_forward(hs, m.attention)
    q = np.concatenate([context, genres], axis=1)
    qd = q if masks is None else q * masks
    logits = qd @ m.output.W_o.T + m.output.b_o
    probs = softmax(logits, axis=1)
    return probs, _Cache(gcache, acache, hs, q, masks, probs)


def backward(m: ModelParams, dlogits: np.ndarray, cache: _Cache) -> ModelParams:
    qd = cache.q if cache.mask is None else cache.q * cache.mask
    out = OutputParams(dlogits.T @ qd, dlogits.sum(axis=0))
    dq = dlogits @ m.output.W_o
    if cache.mask is not None:
        dq = dq * cache.mask
    dcontext = dq[:, :m.hidden_dim]
    dhs, att = attention_backward(dcontext, cache.att, m.attention)
    gru = gru_backward(dhs, cache.gru, m.gru)
    return ModelParams(gru, att, out, m.rng_seed)


def classify_window(features, genre, m: ModelParams, dropout_mask=None) -> np.ndarray:
    """Class probabilities (LOW, MED, HIGH) for one window of utterance features."""
    X = np.asarray(features, dtype=np.float64)[None]
    G = np.asarray(genre, dtype=np.float64)[None]
    mask = None if dropout_mask is None else np.asarray(dropout_mask, dtype=np.float64)[None]
    if mask is not None and mask.shape[1] != m.hidden_dim + m.genre_dim:
        raise DimensionMismatchError("dropout mask must cover context and genre units")
    probs, _ = forward(m, X, G, mask)
    return probs[0]


def classify_windows(X: np.ndarray, genres: np.ndarray, m: ModelParams) -> np.ndarray:
    """Batched inference, dropout off. Returns (B, 3)."""
    probs, _ = forward(m, np.asarray(X, dtype=np.float64), np.asarray(genres, dtype=np.float64))
    return probs


@dataclass
class Example:
    features: np.ndarray  # (T, D)
    genre: np.ndarray  # (G,)
    gold: int


def _as_examples(batch) -> list[Example]:
    out = []
    for item in batch:
        ex = item if isinstance(item, Example) else Example(*item)
        gold = int(ex.gold)
        if gold not in range(N_CLASSES):
            raise ValidationError(f"gold class {ex.gold!r} not in LOW/MED/HIGH")
        out.append(Example(np.asarray(ex.features, dtype=np.float64), np.asarray(ex.genre, dtype=np.float64), gold))
    return out


def batch_loss_and_gradients(m: ModelParams, X: np.ndarray, genres: np.ndarray, gold: np.ndarray,
                             masks: np.ndarray | None = None) -> tuple[float, ModelParams]:
    """Summed cross-entropy and its gradient for a stacked batch of equal-length windows."""
    probs, cache = forward(m, X, genres, masks)
    B = X.shape[0]
    p_gold = probs[np.arange(B), gold]
    loss = float(-np.sum(np.log(p_gold)))
    dlogits = probs.copy()
    dlogits[np.arange(B), gold] -= 1.0
    return loss, backward(m, dlogits, cache)


def loss_and_gradients(batch: Sequence, m: ModelParams, train_rng: np.random.Generator | None = None,
                       dropout_keep: float = 0.5) -> tuple[float, ModelParams]:
    """Mean cross-entropy over ``batch`` and its exact gradient.

    ``batch`` holds ``(window_features, genre_bits, gold_class)`` items. When
    ``train_rng`` is given, dropout masks are drawn Bernoulli(``dropout_keep``)
    per example over the concatenated context+genre vector and kept units
    are scaled by ``1/dropout_keep``; with ``train_rng=None`` dropout is off.
    """
    examples = _as_examples(batch)
    if not examples:
        raise EmptyInputError("empty batch")
    width = m.hidden_dim + m.genre_dim
    masks = None
    if train_rng is not None and dropout_keep < 1.0:
        masks = (train_rng.random((len(examples), width)) < dropout_keep) / dropout_keep
    # group equal-length windows so each group runs as one stacked batch
    groups: dict[int, list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault(ex.features.shape[0], []).append(i)
    total = 0.0
    grads = m.zeros_like()
    for idx in groups.values():
        X = np.stack([examples[i].features for i in idx])
        G = np.stack([examples[i].genre for i in idx])
        y = np.array([examples[i].gold for i in idx])
        mk = None if masks is None else masks[idx]
        loss, g = batch_loss_and_gradients(m, X, G, y, mk)
        total += loss
        grads = grads.map(np.add, g)
    n = len(examples)
    return total / n, grads.map(lambda a: a / n)


def finite_diff_check(m: ModelParams, batch: Sequence, epsilon: float = 1e-5) -> float:
    """Max entrywise relative error between analytic and central-difference gradients.

    Dropout is disabled. The denominator is ``max(|analytic|, |numeric|, 1e-12)``.
    """
    if not epsilon > 0:
        raise InvalidEpsilonError(f"epsilon must be positive, got {epsilon}")
    _, analytic = loss_and_gradients(batch, m, None)
    probe = m.copy()
    worst = 0.0
    for (name, arr), (_, grad) in zip(probe.tensors(), analytic.tensors()):
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            up, _ = loss_and_gradients(batch, probe, None)
            flat[i] = orig - epsilon
            down, _ = loss_and_gradients(batch, probe, None)
            flat[i] = orig
            numeric = (up - down) / (2 * epsilon)
            denom = max(abs(gflat[i]), abs(numeric), 1e-12)
            worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst
