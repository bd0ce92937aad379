"""Utterance featurization: n-gram sentence embeddings, sentiment vectors, genre bits."""
from __future__ import annotations

import io
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence, TextIO

import numpy as np

from .errors import DimensionMismatchError, DuplicateKeyError, ParseError
from .ingest import Screenplay, Utterance, Violence
from .neural.lstm import BiLstmParams, bilstm_forward

log = logging.getLogger(__name__)

DEFAULT_GENRES = (
    "Action", "Adventure", "Animation", "Biography", "Comedy", "Crime",
    "Documentary", "Drama", "Family", "Fantasy", "Film-Noir", "History",
    "Horror", "Music", "Musical", "Mystery", "Romance", "Sci-Fi", "Short",
    "Sport", "Thriller", "War", "Western",
)


@dataclass(frozen=True)
class EmbeddingTable:
    dimension: int
    entries: Mapping[str, np.ndarray]
    ngram_order: int = 2

    def __len__(self):
        return len(self.entries)


def load_embeddings(stream: TextIO | str, ngram_order: int = 2) -> EmbeddingTable:
    """Read a word2vec-style text table: ``count dim`` header, then ``key v1 .. vd`` rows.

    N-gram keys join their tokens with ``_``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    header = stream.readline().split()
    if len(header) != 2:
        raise ParseError("embedding header must be 'count dimension'")
    try:
        count, dim = int(header[0]), int(header[1])
    except ValueError:
        raise ParseError(f"bad embedding header {header!r}") from None
    if dim <= 0 or count < 0:
        raise ParseError(f"bad embedding header {header!r}")
    entries: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(stream, start=2):
        parts = line.split()
        if not parts:
            continue
        key, values = parts[0], parts[1:]
        if len(values) != dim:
            raise DimensionMismatchError(f"line {lineno}: {key!r} has {len(values)} values, expected {dim}")
        if key in entries:
            raise DuplicateKeyError(f"line {lineno}: duplicate embedding key {key!r}")
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric value in {key!r}") from None
        if not np.all(np.isfinite(vec)):
            raise ParseError(f"line {lineno}: non-finite value in {key!r}")
        entries[key] = vec
    if len(entries) != count:
        raise ParseError(f"header announces {count} entries, found {len(entries)}")
    return EmbeddingTable(dim, entries, ngram_order)


def ngrams(tokens: Sequence[str], order: int) -> list[str]:
    """Lowercased unigrams followed by contiguous n-grams of orders 2..order."""
    toks = [t.lower() for t in tokens]
    out = list(toks)
    for n in range(2, order + 1):
        out.extend("_".join(toks[i:i + n]) for i in range(len(toks) - n + 1))
    return out


def embed_sentence(tokens: Sequence[str], table: EmbeddingTable, misses: Counter | None = None) -> np.ndarray:
    """Mean of every unigram and n-gram vector present in the table.

    Falls back to the zero vector (counted under ``misses["embedding"]``)
    when nothing is found.
    """
    found = [table.entries[g] for g in ngrams(tokens, table.ngram_order) if g in table.entries]
    if not found:
        if misses is not None:
            misses["embedding"] += 1
        return np.zeros(table.dimension)
    return np.mean(found, axis=0)


def encode_genres(genres: Iterable[str], vocabulary: Sequence[str], warnings: Counter | None = None) -> np.ndarray:
    index = {g: i for i, g in enumerate(vocabulary)}
    bits = np.zeros(len(vocabulary))
    for g in genres:
        i = index.get(g)
        if i is None:
            if warnings is not None:
                warnings["genre_unknown"] += 1
            log.warning("genre %r not in vocabulary, ignored", g)
            continue
        bits[i] = 1.0
    return bits


def load_genre_vocabulary(stream: TextIO) -> list[str]:
    vocab = [line.strip() for line in stream if line.strip()]
    if vocab != sorted(set(vocab)):
        raise ParseError("genre vocabulary must be sorted and unique")
    return vocab


# --------------------------------------------------------------------------
# sentiment providers


class SentimentProvider(Protocol):
    dimension: int

    def __call__(self, utterance: Utterance, misses: Counter | None = None) -> np.ndarray: ...


class PrecomputedSentiment:
    """Sentiment vectors keyed by ``(movie_id, index)``.

    File format: one ``movie_id,index,v1,...,v_dm`` record per line.
    """

    def __init__(self, vectors: Mapping[tuple[str, int], np.ndarray], dimension: int):
        self.vectors = dict(vectors)
        self.dimension = dimension

    @classmethod
    def load(cls, stream: TextIO | str, dimension: int | None = None) -> "PrecomputedSentiment":
        if isinstance(stream, str):
            stream = io.StringIO(stream)
        vectors = {}
        for lineno, line in enumerate(stream, start=1):
            parts = [p.strip() for p in line.split(",")]
            if not line.strip():
                continue
            if len(parts) < 3:
                raise ParseError(f"sentiment line {lineno}: expected movie_id,index,v1..")
            try:
                key = (parts[0], int(parts[1]))
                vec = np.array([float(v) for v in parts[2:]])
            except ValueError:
                raise ParseError(f"sentiment line {lineno}: non-numeric field") from None
            if dimension is None:
                dimension = len(vec)
            if len(vec) != dimension:
                raise DimensionMismatchError(
                    f"sentiment line {lineno}: {len(vec)} values, expected {dimension}")
            if key in vectors:
                raise DuplicateKeyError(f"sentiment line {lineno}: duplicate key {key}")
            vectors[key] = vec
        if dimension is None:
            raise ParseError("empty sentiment file and no dimension given")
        return cls(vectors, dimension)

    def __call__(self, utterance: Utterance, misses: Counter | None = None) -> np.ndarray:
        vec = self.vectors.get((utterance.movie_id, utterance.index))
        if vec is None:
            if misses is not None:
                misses["sentiment"] += 1
            return np.zeros(self.dimension)
        return vec.copy()


class BiLstmSentiment:
    """Final hidden states of a bidirectional LSTM run over token vectors.

    Tokens are looked up as lowercased unigrams; out-of-vocabulary tokens
    contribute zero vectors. An utterance with no tokens is encoded as a
    single zero vector.
    """

    def __init__(self, params: BiLstmParams, table: EmbeddingTable):
        if params.forward.input_dim != table.dimension:
            raise DimensionMismatchError(
                f"LSTM input_dim {params.forward.input_dim} != embedding dim {table.dimension}")
        self.params = params
        self.table = table
        self.dimension = 2 * params.forward.hidden_dim

    def token_vectors(self, tokens: Sequence[str]) -> np.ndarray:
        zero = np.zeros(self.table.dimension)
        rows = [self.table.entries.get(t.lower(), zero) for t in tokens] or [zero]
        return np.array(rows)

    def __call__(self, utterance: Utterance, misses: Counter | None = None) -> np.ndarray:
        return bilstm_forward(self.token_vectors(utterance.tokens), self.params)


def sentiment_features(utterance: Utterance, provider: SentimentProvider, misses: Counter | None = None) -> np.ndarray:
    return provider(utterance, misses)


# --------------------------------------------------------------------------
# whole screenplays


@dataclass(frozen=True)
class FeaturizedScreenplay:
    """A screenplay with one combined feature row per utterance."""

    screenplay: Screenplay
    features: np.ndarray  # (n_utterances, d_s + d_m)
    genre: np.ndarray  # (G,)

    @property
    def movie_id(self) -> str:
        return self.screenplay.movie_id

    @property
    def label(self) -> Violence | None:
        return self.screenplay.violence_label

    def __len__(self):
        return self.features.shape[0]


def utterance_feature(utterance: Utterance, table: EmbeddingTable, provider: SentimentProvider,
                      misses: Counter | None = None) -> np.ndarray:
    """Semantic embedding concatenated with the sentiment vector."""
    combined = np.concatenate([embed_sentence(utterance.tokens, table, misses),
                               sentiment_features(utterance, provider, misses)])
    if not np.all(np.isfinite(combined)):
        raise DimensionMismatchError(f"non-finite feature for {utterance.movie_id}:{utterance.index}")
    return combined


def featurize(screenplay: Screenplay, table: EmbeddingTable, provider: SentimentProvider,
              vocabulary: Sequence[str] = DEFAULT_GENRES, misses: Counter | None = None) -> FeaturizedScreenplay:
    dim = table.dimension + provider.dimension
    rows = [utterance_feature(u, table, provider, misses) for u in screenplay.utterances]
    features = np.array(rows) if rows else np.zeros((0, dim))
    return FeaturizedScreenplay(screenplay, features, encode_genres(screenplay.genres, vocabulary, misses))
