"""Screenplay, manifest, demographics and CoNLL-U ingestion."""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

from .errors import (
    DuplicateKeyError,
    EmptyScreenplayError,
    MalformedScriptError,
    ManifestError,
    ParseError,
    UnalignedSentenceError,
    UnknownLabelError,
)

log = logging.getLogger(__name__)


class Violence(enum.IntEnum):
    """Violence rating; integer value is the class index and severity rank."""

    LOW = 0
    MED = 1
    HIGH = 2

    @classmethod
    def parse(cls, text: str) -> "Violence":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise UnknownLabelError(f"unknown violence label {text!r}") from None


class Gender(enum.Enum):
    FEMALE = "FEMALE"
    MALE = "MALE"
    UNKNOWN = "UNKNOWN"


class Race(enum.Enum):
    WHITE = "WHITE"
    BLACK = "BLACK"
    LATINO = "LATINO"
    ASIAN = "ASIAN"
    MIXED = "MIXED"
    OTHER = "OTHER"
    UNKNOWN = "UNKNOWN"


# Punctuation removed before whitespace splitting; apostrophes handled apart.
_STRIP_CHARS = str.maketrans("", "", '.,!?;:"—')
_EDGE_APOSTROPHE = re.compile(r"(?<![A-Za-z0-9])'|'(?![A-Za-z0-9])")


def tokenize(text: str) -> list[str]:
    """Split on whitespace after stripping ``.,!?;:"—`` and non-intra-word apostrophes.

    Case is preserved; embedding lookup lowercases on its own.
    """
    text = text.translate(_STRIP_CHARS)
    text = _EDGE_APOSTROPHE.sub("", text)
    return text.split()


@dataclass(frozen=True)
class Utterance:
    movie_id: str
    index: int
    speaker_id: str
    text: str
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.tokens:
            object.__setattr__(self, "tokens", tuple(tokenize(self.text)))


@dataclass(frozen=True)
class Screenplay:
    movie_id: str
    title: str
    utterances: tuple[Utterance, ...]
    genres: frozenset[str] = frozenset()
    violence_label: Violence | None = None

    @property
    def speakers(self) -> list[str]:
        """Distinct speakers in order of first appearance."""
        return list(dict.fromkeys(u.speaker_id for u in self.utterances))


@dataclass(frozen=True)
class ManifestEntry:
    title: str
    genres: frozenset[str]
    violence_label: Violence | None


@dataclass(frozen=True)
class DemographicRecord:
    movie_id: str
    character_id: str
    gender: Gender = Gender.UNKNOWN
    race: Race = Race.UNKNOWN


@dataclass(frozen=True)
class Token:
    id: int
    surface: str
    lemma: str
    upos: str
    head: int
    deprel: str
    misc: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParsedSentence:
    movie_id: str
    utt_index: int
    tokens: tuple[Token, ...]

    @property
    def root(self) -> Token:
        return next(t for t in self.tokens if t.head == 0)

    def children(self, head_id: int) -> list[Token]:
        return [t for t in self.tokens if t.head == head_id]


# --------------------------------------------------------------------------
# screenplay text

_CUE_NAME = re.compile(r"[A-Z0-9 .'\-]+")
_TRAILING_PAREN = re.compile(r"\s*\([^()]*\)\s*$")
_SCENE_HEADING = re.compile(r"^(INT\.|EXT\.|INT/EXT\.|I/E\.)")


def normalize_speaker(raw: str) -> str:
    """Trim, uppercase, collapse whitespace and drop trailing ``(V.O.)``-style notes."""
    name = " ".join(raw.split()).upper()
    while True:
        stripped = _TRAILING_PAREN.sub("", name)
        if stripped == name:
            break
        name = stripped
    return name.strip()


def _is_parenthetical(line: str) -> bool:
    return line.startswith("(") and line.endswith(")")


def is_cue(line: str) -> bool:
    """True for a character-cue line.

    A cue is uppercase letters, digits, spaces, periods, apostrophes and
    hyphens, at most 40 characters, optionally followed by parenthetical
    extensions such as ``(V.O.)``, and not a scene heading.
    """
    line = line.strip()
    if not line or _SCENE_HEADING.match(line):
        return False
    head = line.split("(", 1)[0]
    name = " ".join(head.split())
    if not name or len(name) > 40 or not _CUE_NAME.fullmatch(name):
        return False
    # the full line must be the name plus parentheticals, nothing else
    rest = line[len(head):]
    if rest and not re.fullmatch(r"(\s*\([^()]*\))+\s*", rest):
        return False
    return any(c.isalpha() for c in name)


def parse_screenplay(raw_text: str, movie_id: str, title: str = "",
                     genres: Iterable[str] = (), violence_label: Violence | None = None) -> Screenplay:
    """Extract the ordered dialogue of one screenplay.

    Scene headings and action lines are dropped. A cue opens a dialogue block
    that runs until the next blank line; parenthetical lines inside it are
    discarded and the remaining lines are joined with single spaces. A
    paragraph that opens with a parenthetical but has no cue is treated as
    dialogue without a speaker and rejected.
    """
    if not raw_text.strip():
        raise EmptyScreenplayError(f"{movie_id}: empty screenplay")

    utterances: list[Utterance] = []
    speaker: str | None = None
    lines: list[str] = []

    def flush():
        nonlocal speaker, lines
        if speaker is not None and lines:
            text = " ".join(lines)
            utterances.append(Utterance(movie_id, len(utterances), speaker, text))
        speaker, lines = None, []

    for lineno, raw in enumerate(raw_text.splitlines(), start=1):
        line = " ".join(raw.split())
        if not line:
            flush()
        elif speaker is not None:
            if not _is_parenthetical(line):
                lines.append(line)
        elif is_cue(line):
            speaker = normalize_speaker(line)
        elif _is_parenthetical(line):
            raise MalformedScriptError("dialogue block without a preceding character cue", lineno)
        # anything else is a scene heading or action line
    flush()

    if not utterances:
        raise EmptyScreenplayError(f"{movie_id}: no dialogue found")
    return Screenplay(movie_id, title, tuple(utterances), frozenset(genres), violence_label)


# --------------------------------------------------------------------------
# tabular sidecars


def _reader(source: TextIO | str | Iterable[str], header: list[str]) -> Iterable[tuple[int, list[str]]]:
    if isinstance(source, str):
        source = io.StringIO(source)
    rows = csv.reader(source)
    first = next(rows, None)
    if first is None or [h.strip() for h in first] != header:
        raise ManifestError(f"expected header {','.join(header)!r}, got {first!r}")
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ManifestError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        yield lineno, [c.strip() for c in row]


MANIFEST_HEADER = ["movie_id", "title", "genres", "violence_label"]
DEMOGRAPHICS_HEADER = ["movie_id", "character_id", "gender", "race"]


def load_manifest(source) -> dict[str, ManifestEntry]:
    """Read ``movie_id,title,genres,violence_label`` rows; genres are ``|``-separated."""
    out: dict[str, ManifestEntry] = {}
    for lineno, (movie_id, title, genres, label) in _reader(source, MANIFEST_HEADER):
        if movie_id in out:
            raise DuplicateKeyError(f"line {lineno}: duplicate movie_id {movie_id!r}")
        out[movie_id] = ManifestEntry(
            title=title,
            genres=frozenset(g.strip() for g in genres.split("|") if g.strip()),
            violence_label=Violence.parse(label) if label else None,
        )
    return out


def load_demographics(source, warnings: Counter | None = None) -> list[DemographicRecord]:
    """Read demographic rows; unrecognized gender/race values become UNKNOWN.

    Each fallback increments ``warnings["demographics_unknown"]`` when a
    counter is given.
    """
    seen = set()
    records = []
    for lineno, (movie_id, character_id, gender, race) in _reader(source, DEMOGRAPHICS_HEADER):
        character_id = normalize_speaker(character_id)
        key = (movie_id, character_id)
        if key in seen:
            raise DuplicateKeyError(f"line {lineno}: duplicate demographic row for {key}")
        seen.add(key)
        g = Gender.__members__.get(gender.upper())
        r = Race.__members__.get(race.upper())
        if g is None or r is None:
            if warnings is not None:
                warnings["demographics_unknown"] += 1
            log.debug("line %d: unrecognized demographics %r/%r", lineno, gender, race)
        records.append(DemographicRecord(movie_id, character_id, g or Gender.UNKNOWN, r or Race.UNKNOWN))
    return records


def demographics_index(records: Iterable[DemographicRecord]) -> dict[tuple[str, str], DemographicRecord]:
    return {(r.movie_id, r.character_id): r for r in records}


# --------------------------------------------------------------------------
# CoNLL-U


def _parse_misc(text: str) -> dict[str, str]:
    if text in ("", "_"):
        return {}
    out = {}
    for item in text.split("|"):
        key, sep, value = item.partition("=")
        out[key] = value if sep else ""
    return out


def _finish_sentence(comments: dict[str, str], rows: list[tuple[int, list[str]]], start: int) -> ParsedSentence:
    if "movie_id" not in comments or "utt_index" not in comments:
        raise UnalignedSentenceError(f"line {start}: sentence lacks # movie_id / # utt_index comments")
    try:
        utt_index = int(comments["utt_index"])
    except ValueError:
        raise ParseError(f"line {start}: non-integer utt_index {comments['utt_index']!r}") from None
    if utt_index < 0:
        raise ParseError(f"line {start}: negative utt_index")
    tokens = []
    for lineno, cols in rows:
        try:
            tid, head = int(cols[0]), int(cols[6])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer id or head") from None
        tokens.append(Token(tid, cols[1], cols[2], cols[3], head, cols[7], _parse_misc(cols[9])))
    n = len(tokens)
    if [t.id for t in tokens] != list(range(1, n + 1)):
        raise ParseError(f"line {start}: token ids are not 1..{n}")
    for t in tokens:
        if not 0 <= t.head <= n:
            raise ParseError(f"line {start}: head {t.head} out of range for token {t.id}")
    roots = sum(t.head == 0 for t in tokens)
    if roots != 1:
        raise ParseError(f"line {start}: sentence has {roots} roots, expected 1")
    return ParsedSentence(comments["movie_id"], utt_index, tuple(tokens))


def load_conllu(stream: TextIO | str) -> list[ParsedSentence]:
    """Read CoNLL-U sentences aligned to utterances through metadata comments.

    Multiword-token ranges (``3-4``) and empty nodes (``5.1``) are skipped.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    sentences = []
    comments: dict[str, str] = {}
    rows: list[tuple[int, list[str]]] = []
    start = 1
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n").rstrip("\r")
        if not line.strip():
            if rows:
                sentences.append(_finish_sentence(comments, rows, start))
            comments, rows = {}, []
            start = lineno + 1
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                comments[key.strip()] = value.strip()
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"line {lineno}: expected 10 tab-separated columns, got {len(cols)}")
        if "-" in cols[0] or "." in cols[0]:
            continue
        rows.append((lineno, cols))
    if rows:
        sentences.append(_finish_sentence(comments, rows, start))
    return sentences


# --------------------------------------------------------------------------
# canonical dataset (JSON lines)

_DATASET_FIELDS = ("movie_id", "index", "speaker_id", "text")


def write_dataset(screenplays: Iterable[Screenplay], stream: TextIO) -> None:
    for sp in screenplays:
        for u in sp.utterances:
            record = {"movie_id": u.movie_id, "index": u.index, "speaker_id": u.speaker_id, "text": u.text}
            stream.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_dataset(stream: TextIO | str, manifest: Mapping[str, ManifestEntry] | None = None) -> list[Screenplay]:
    """Rebuild screenplays from the canonical dataset, in first-seen movie order.

    Title, genres and label come from ``manifest`` when given.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    by_movie: dict[str, list[Utterance]] = {}
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            values = [rec[k] for k in _DATASET_FIELDS]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"dataset line {lineno}: {exc}") from None
        movie_id, index, speaker_id, text = values
        utts = by_movie.setdefault(movie_id, [])
        if index != len(utts):
            raise ParseError(f"dataset line {lineno}: {movie_id} index {index} out of sequence")
        utts.append(Utterance(movie_id, index, speaker_id, text))
    out = []
    for movie_id, utts in by_movie.items():
        entry = (manifest or {}).get(movie_id)
        if entry is None:
            out.append(Screenplay(movie_id, "", tuple(utts)))
        else:
            out.append(Screenplay(movie_id, entry.title, tuple(utts), entry.genres, entry.violence_label))
    return out
