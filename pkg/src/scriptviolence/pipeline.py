"""Context windows, cross-validated training and per-utterance violence posteriors."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DivergedTrainingError, EmptyInputError, OddWindowError, TooFewMoviesError, ValidationError
from .features import FeaturizedScreenplay
from .ingest import Violence
from .neural.adam import AdamState, adam_step
from .neural.model import ModelParams, batch_loss_and_gradients, classify_windows, init_model
from .stats import macro_f1

log = logging.getLogger(__name__)

CLASSES = (Violence.LOW, Violence.MED, Violence.HIGH)


@dataclass(frozen=True)
class ContextWindow:
    movie_id: str
    center_index: int
    k: int
    features: np.ndarray  # (k + 1, D)
    padding: np.ndarray  # (k + 1,) bool

    @property
    def slots(self) -> list[tuple[np.ndarray, bool]]:
        return list(zip(self.features, (bool(p) for p in self.padding)))


def _check_k(k: int) -> None:
    if k < 2 or k % 2:
        raise OddWindowError(f"window parameter k must be an even integer >= 2, got {k}")


def padded_features(features: np.ndarray, k: int) -> np.ndarray:
    """Features with k/2 zero rows on each side, so window t is rows t .. t+k."""
    _check_k(k)
    half = k // 2
    n, d = features.shape
    out = np.zeros((n + k, d))
    out[half:half + n] = features
    return out


def window_batch(padded: np.ndarray, centers: Sequence[int], k: int) -> np.ndarray:
    """Stack windows for the given center indices from a padded feature array."""
    return np.stack([padded[t:t + k + 1] for t in centers])


def make_windows(movie: FeaturizedScreenplay, k: int) -> list[ContextWindow]:
    """One window of length k+1 per utterance, centered on it, zero-padded at the edges."""
    _check_k(k)
    n = len(movie)
    if n == 0:
        raise EmptyInputError(f"{movie.movie_id}: no utterances to window")
    half = k // 2
    padded = padded_features(movie.features, k)
    pos = np.arange(-half, half + 1)
    windows = []
    for t in range(n):
        idx = t + pos
        windows.append(ContextWindow(movie.movie_id, t, k, padded[t:t + k + 1].copy(), (idx < 0) | (idx >= n)))
    return windows


# --------------------------------------------------------------------------
# configuration and reports


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 16
    dropout_keep: float = 0.5
    convergence_delta: float = 1e-8
    max_epochs: int = 200
    folds: int = 5
    hidden_grid: tuple[int, ...] = (4, 8, 16, 32)
    k: int = 500
    seed: int = 0
    attention_dim: int | None = None

    def __post_init__(self):
        self.hidden_grid = tuple(int(h) for h in self.hidden_grid)
        _check_k(self.k)
        if self.folds < 2:
            raise ValidationError("folds must be at least 2")
        if not 0 < self.dropout_keep <= 1:
            raise ValidationError("dropout_keep must be in (0, 1]")
        if not self.hidden_grid:
            raise ValidationError("hidden_grid is empty")


@dataclass
class FitResult:
    model: ModelParams
    epochs: int
    converged: bool
    losses: list[float] = field(default_factory=list)


@dataclass
class CvReport:
    k: int
    seed: int
    folds: list[list[str]]
    # per hidden size: per-fold scores
    movie_f1: dict[int, list[float]]
    window_f1: dict[int, list[float]]
    selected_hidden: int
    final_epochs: int
    final_converged: bool
    train_movie_f1: float

    def mean_movie_f1(self, hidden: int) -> float:
        return float(np.mean(self.movie_f1[hidden]))

    def to_dict(self) -> dict:
        grid = []
        for h in self.movie_f1:
            grid.append({
                "hidden": h,
                "fold_movie_macro_f1": self.movie_f1[h],
                "mean_movie_macro_f1": self.mean_movie_f1(h),
                "fold_window_macro_f1": self.window_f1[h],
                "mean_window_macro_f1": float(np.mean(self.window_f1[h])),
            })
        return {
            "k": self.k, "seed": self.seed, "folds": self.folds, "grid": grid,
            "selected_hidden": self.selected_hidden,
            "final_epochs": self.final_epochs, "final_converged": self.final_converged,
            "train_movie_macro_f1": self.train_movie_f1,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# training


def _labeled(movies: Sequence[FeaturizedScreenplay]) -> list[FeaturizedScreenplay]:
    for mv in movies:
        if mv.label is None:
            raise ValidationError(f"{mv.movie_id}: training movie has no violence label")
        if len(mv) == 0:
            raise EmptyInputError(f"{mv.movie_id}: no utterances")
    return list(movies)


def fit(movies: Sequence[FeaturizedScreenplay], hidden: int, cfg: TrainConfig, seed: int) -> FitResult:
    """Train one model on every window of ``movies`` with the movie label as target.

    Stops when consecutive epoch losses (mean mini-batch loss, dropout on)
    differ by less than ``cfg.convergence_delta`` or after ``cfg.max_epochs``.
    """
    movies = _labeled(movies)
    D = movies[0].features.shape[1]
    G = movies[0].genre.shape[0]
    rng = np.random.default_rng(seed)
    model = init_model(D, hidden, G, cfg.attention_dim, seed)
    state = AdamState.for_params(model, cfg.learning_rate)
    padded = [padded_features(mv.features, cfg.k) for mv in movies]
    index = np.array([(i, t) for i, mv in enumerate(movies) for t in range(len(mv))])
    width = hidden + G
    losses: list[float] = []
    converged = False
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(index))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            sel = index[order[start:start + cfg.batch_size]]
            X = np.stack([padded[i][t:t + cfg.k + 1] for i, t in sel])
            genres = np.stack([movies[i].genre for i, _ in sel])
            gold = np.array([int(movies[i].label) for i, _ in sel])
            masks = None
            if cfg.dropout_keep < 1.0:
                masks = (rng.random((len(sel), width)) < cfg.dropout_keep) / cfg.dropout_keep
            loss, grads = batch_loss_and_gradients(model, X, genres, gold, masks)
            n = len(sel)
            grads = grads.map(lambda a: a / n)
            model, state = adam_step(model, grads, state)
            batch_losses.append(loss / n)
        epoch_loss = float(np.mean(batch_losses))
        if not np.isfinite(epoch_loss):
            raise DivergedTrainingError(f"non-finite training loss at epoch {epoch + 1}")
        losses.append(epoch_loss)
        if len(losses) >= 2 and abs(losses[-1] - losses[-2]) < cfg.convergence_delta:
            converged = True
            break
    log.debug("H=%d seed=%d: %d epochs, converged=%s, loss=%.6g", hidden, seed, len(losses), converged, losses[-1])
    return FitResult(model, len(losses), converged, losses)


def fold_partition(movie_ids: Sequence[str], folds: int, seed: int) -> list[list[str]]:
    """Seeded shuffle of movies split into ``folds`` near-equal disjoint parts."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(movie_ids))
    return [[movie_ids[i] for i in part] for part in np.array_split(order, folds)]


def _fold_seed(seed: int, hidden: int, fold: int | None) -> int:
    # the final refit (fold None) gets its own stream, distinct from every fold
    key = [seed, hidden, 0] if fold is None else [seed, hidden, 1, fold]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


def train(dataset: Sequence[FeaturizedScreenplay], cfg: TrainConfig) -> tuple[ModelParams, CvReport]:
    """Cross-validate each hidden size, pick the best mean movie-level macro-F1, refit on everything.

    Ties between hidden sizes go to the smaller one.
    """
    movies = _labeled(dataset)
    if len(movies) < cfg.folds:
        raise TooFewMoviesError(f"{len(movies)} labeled movies cannot fill {cfg.folds} folds")
    ids = [mv.movie_id for mv in movies]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate movie ids in training data")
    by_id = dict(zip(ids, movies))
    parts = fold_partition(ids, cfg.folds, cfg.seed)
    movie_f1: dict[int, list[float]] = {}
    window_f1: dict[int, list[float]] = {}
    for hidden in cfg.hidden_grid:
        movie_f1[hidden], window_f1[hidden] = [], []
        for f, held_out in enumerate(parts):
            held = set(held_out)
            train_movies = [by_id[i] for i in ids if i not in held]
            fitted = fit(train_movies, hidden, cfg, _fold_seed(cfg.seed, hidden, f))
            m_pred, m_gold, w_pred, w_gold = [], [], [], []
            for mid in held_out:
                mv = by_id[mid]
                records, label = movie_posteriors(fitted.model, mv, cfg.k)
                m_pred.append(label)
                m_gold.append(mv.label)
                w_pred.extend(r.predicted_class for r in records)
                w_gold.extend([mv.label] * len(records))
            movie_f1[hidden].append(macro_f1(m_pred, m_gold, CLASSES))
            window_f1[hidden].append(macro_f1(w_pred, w_gold, CLASSES))
        log.info("H=%d mean movie macro-F1 %.4f", hidden, np.mean(movie_f1[hidden]))
    best = max(cfg.hidden_grid, key=lambda h: (np.mean(movie_f1[h]), -h))
    final = fit(movies, best, cfg, _fold_seed(cfg.seed, best, None))
    preds = [movie_posteriors(final.model, mv, cfg.k)[1] for mv in movies]
    train_f1 = macro_f1(preds, [mv.label for mv in movies], CLASSES)
    report = CvReport(cfg.k, cfg.seed, parts, movie_f1, window_f1, best, final.epochs, final.converged, train_f1)
    return final.model, report


# --------------------------------------------------------------------------
# inference


@dataclass(frozen=True)
class PosteriorRecord:
    movie_id: str
    utterance_index: int
    class_probs: tuple[float, float, float]
    violence_posterior: float
    predicted_class: Violence

    def row(self) -> list[str]:
        return [self.movie_id, str(self.utterance_index), *(repr(float(p)) for p in self.class_probs),
                repr(float(self.violence_posterior)), self.predicted_class.name]


POSTERIOR_HEADER = ["movie_id", "utterance_index", "p_low", "p_med", "p_high", "violence_posterior",
                    "predicted_class"]


def argmax_low(probs) -> Violence:
    """Argmax over LOW/MED/HIGH; ties resolve to the less severe class."""
    return Violence(int(np.argmax(probs)))  # np.argmax returns the first maximum


def movie_posteriors(model: ModelParams, movie: FeaturizedScreenplay, k: int,
                     chunk: int = 256) -> tuple[list[PosteriorRecord], Violence]:
    """Posterior per utterance from its centered window, plus the movie label.

    The movie label is the argmax of the mean class-probability vector.
    """
    _check_k(k)
    if len(movie) == 0:
        raise EmptyInputError(f"{movie.movie_id}: no utterances")
    padded = padded_features(movie.features, k)
    probs = []
    for start in range(0, len(movie), chunk):
        centers = range(start, min(start + chunk, len(movie)))
        X = window_batch(padded, centers, k)
        G = np.repeat(movie.genre[None], len(centers), axis=0)
        probs.append(classify_windows(X, G, model))
    P = np.concatenate(probs)
    records = [
        PosteriorRecord(movie.movie_id, t, tuple(float(v) for v in P[t]), float(1.0 - P[t, 0]), argmax_low(P[t]))
        for t in range(len(movie))
    ]
    return records, argmax_low(P.mean(axis=0))


def read_posteriors(stream) -> list[PosteriorRecord]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header != POSTERIOR_HEADER:
        raise ValidationError(f"posterior file must start with header {','.join(POSTERIOR_HEADER)}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            probs = tuple(float(v) for v in row[2:5])
            out.append(PosteriorRecord(row[0], int(row[1]), probs, float(row[5]), Violence.parse(row[6])))
        except (ValueError, IndexError):
            raise ValidationError(f"posterior line {lineno}: malformed record") from None
    return out
