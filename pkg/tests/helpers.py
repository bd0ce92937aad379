"""Shared builders for the test suite."""
from __future__ import annotations

import numpy as np

from scriptviolence.features import FeaturizedScreenplay
from scriptviolence.ingest import Screenplay, Utterance, Violence
from scriptviolence.neural.model import ModelParams, zero_model


def random_model(D: int, H: int, G: int, seed: int, scale: float = 1.0, A: int | None = None) -> ModelParams:
    """Every tensor uniform(-scale, scale)."""
    rng = np.random.default_rng(seed)
    m = zero_model(D, H, G, A, seed)
    for _, arr in m.tensors():
        arr[...] = rng.uniform(-scale, scale, size=arr.shape)
    return m


def random_batch(D: int, G: int, T: int, n: int, rng: np.random.Generator):
    return [(rng.normal(size=(T, D)), (rng.random(G) < 0.5).astype(float), int(rng.integers(3)))
            for _ in range(n)]


def movie(movie_id: str, features, genre=(), label: Violence | None = None) -> FeaturizedScreenplay:
    features = np.asarray(features, dtype=np.float64)
    utts = tuple(Utterance(movie_id, i, "A", "x") for i in range(features.shape[0]))
    return FeaturizedScreenplay(Screenplay(movie_id, "", utts, violence_label=label), features,
                                np.asarray(genre, dtype=np.float64))


def marker_corpus(seed: int = 0, n_utts: int = 6, dim: int = 6, marker: float = 3.0) -> list[FeaturizedScreenplay]:
    """Five movies (LOW, LOW, MED, MED, HIGH); MED and HIGH carry a marker on their own feature."""
    rng = np.random.default_rng(seed)
    labels = [Violence.LOW, Violence.LOW, Violence.MED, Violence.MED, Violence.HIGH]
    out = []
    for i, lab in enumerate(labels):
        feats = rng.normal(scale=0.1, size=(n_utts, dim))
        if lab is Violence.MED:
            feats[:, 0] += marker
        elif lab is Violence.HIGH:
            feats[:, 1] += marker
        out.append(movie(f"m{i}", feats, np.zeros(3), lab))
    return out
