"""Command-line entry point: ingest, train, classify, roles, stats, report, check.

Exit codes: 0 success, 1 validation error, 2 I/O error.

Configuration is an INI file with a ``[run]`` section; relative paths are
resolved against the config file's directory. Command-line flags win over
the file.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import sys
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ingest
from .errors import ValidationError
from .features import (
    DEFAULT_GENRES,
    BiLstmSentiment,
    FeaturizedScreenplay,
    PrecomputedSentiment,
    featurize,
    load_embeddings,
    load_genre_vocabulary,
)
from .ingest import Violence
from .neural.model import finite_diff_check, zero_model
from .neural.serialize import dumps_model, load_bilstm, load_model, loads_model, save_model
from .pipeline import (
    CLASSES,
    POSTERIOR_HEADER,
    TrainConfig,
    make_windows,
    movie_posteriors,
    read_posteriors,
    train,
)
from .roles import (
    INTERACTION_HEADER,
    ROLE_HEADER,
    Form,
    collect_interactions,
    form_distribution,
    movie_roles,
    read_roles,
)
from .stats import anova_oneway, macro_f1, t_test_two_sample
from .stats.analysis import run_analysis

log = logging.getLogger("scriptviolence")

COMMANDS = ("ingest", "train", "classify", "roles", "stats", "report", "check")
PATH_KEYS = ("scripts", "manifest", "demographics", "embeddings", "sentiment", "sentiment_model", "parses",
             "genres", "dataset")

# output file names inside the --out directory
DATASET = "dataset.jsonl"
MODEL = "model.txt"
CV_REPORT = "cv_report.json"
POSTERIORS = "posteriors.csv"
MOVIES = "movies.csv"
ROLES = "roles.csv"
INTERACTIONS = "interactions.csv"
FORMS = "forms.csv"
STATS = "stats_report.csv"
RESIDUALS = "residuals.csv"
REPORT = "report.txt"


@dataclass
class RunConfig:
    scripts: Path | None = None
    manifest: Path | None = None
    demographics: Path | None = None
    embeddings: Path | None = None
    sentiment: Path | None = None
    sentiment_model: Path | None = None
    parses: Path | None = None
    genres: Path | None = None
    dataset: Path | None = None
    out: Path = Path("out")
    log_level: str = "WARNING"
    ngram_order: int = 2
    fixed_effect: str = "movie"
    omnibus_grouping: str = "gender_race"
    train: TrainConfig = field(default_factory=TrainConfig)

    def dataset_path(self) -> Path:
        return self.dataset or self.out / DATASET

    def require(self, *keys: str) -> None:
        for key in keys:
            path = getattr(self, key)
            if path is None:
                raise ValidationError(f"configuration is missing required path '{key}'")
            if not Path(path).exists():
                raise FileNotFoundError(f"{key}: {path} does not exist")


_TRAIN_KEYS = {
    "learning_rate": float, "batch_size": int, "dropout_keep": float, "convergence_delta": float,
    "max_epochs": int, "folds": int, "k": int, "seed": int, "attention_dim": int,
    "hidden_grid": lambda s: tuple(int(v) for v in s.replace(",", " ").split()),
}


def _apply(cfg: RunConfig, train_kwargs: dict, key: str, raw, base: Path) -> None:
    raw = str(raw)
    try:
        if key in PATH_KEYS or key == "out":
            p = Path(raw)
            setattr(cfg, key, p if p.is_absolute() else base / p)
        elif key in _TRAIN_KEYS:
            train_kwargs[key] = _TRAIN_KEYS[key](raw)
        elif key == "ngram_order":
            cfg.ngram_order = int(raw)
        elif key in ("log_level", "fixed_effect", "omnibus_grouping"):
            setattr(cfg, key, raw)
        else:
            raise ValidationError(f"unknown configuration key {key!r}")
    except ValidationError:
        raise
    except ValueError:
        raise ValidationError(f"bad value for {key}: {raw!r}") from None


def load_config(path: Path | None, overrides: dict) -> RunConfig:
    """File values first (paths relative to the file), then non-None flag overrides."""
    cfg = RunConfig()
    train_kwargs: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        if not parser.has_section("run"):
            raise ValidationError(f"{path}: missing [run] section")
        for key, raw in parser["run"].items():
            _apply(cfg, train_kwargs, key, raw, Path(path).parent)
    for key, raw in overrides.items():
        if raw is not None:
            _apply(cfg, train_kwargs, key, raw, Path("."))
    cfg.train = TrainConfig(**train_kwargs)
    return cfg


# --------------------------------------------------------------------------
# shared loading


def _read_text(path: Path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _manifest(cfg: RunConfig):
    if cfg.manifest is None:
        return {}
    with open(cfg.manifest, encoding="utf-8", newline="") as fh:
        return ingest.load_manifest(fh)


def _dataset(cfg: RunConfig):
    path = cfg.dataset_path()
    if not path.exists():
        raise FileNotFoundError(f"dataset {path} not found; run 'ingest' first")
    with open(path, encoding="utf-8") as fh:
        return ingest.read_dataset(fh, _manifest(cfg))


def _featurizer(cfg: RunConfig):
    cfg.require("embeddings")
    with open(cfg.embeddings, encoding="utf-8") as fh:
        table = load_embeddings(fh, cfg.ngram_order)
    if cfg.sentiment is not None:
        cfg.require("sentiment")
        with open(cfg.sentiment, encoding="utf-8") as fh:
            provider = PrecomputedSentiment.load(fh)
    elif cfg.sentiment_model is not None:
        cfg.require("sentiment_model")
        provider = BiLstmSentiment(load_bilstm(cfg.sentiment_model), table)
    else:
        raise ValidationError("configure either 'sentiment' (precomputed vectors) or 'sentiment_model' (bi-LSTM)")
    vocab = list(DEFAULT_GENRES)
    if cfg.genres is not None:
        cfg.require("genres")
        with open(cfg.genres, encoding="utf-8") as fh:
            vocab = load_genre_vocabulary(fh)
    misses: Counter = Counter()

    def run(screenplays):
        out = [featurize(sp, table, provider, vocab, misses) for sp in screenplays]
        for key, n in sorted(misses.items()):
            log.info("featurization: %d %s misses", n, key)
        return out
    return run


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --------------------------------------------------------------------------
# commands


def cmd_ingest(cfg: RunConfig) -> None:
    """Parse screenplays into the canonical dataset."""
    cfg.require("scripts")
    manifest = _manifest(cfg)
    scripts = sorted(Path(cfg.scripts).glob("*.txt"))
    if not scripts:
        raise ValidationError(f"no *.txt screenplays in {cfg.scripts}")
    screenplays = []
    for path in scripts:
        entry = manifest.get(path.stem)
        sp = ingest.parse_screenplay(_read_text(path), path.stem)
        if entry is not None:
            sp = ingest.Screenplay(sp.movie_id, entry.title, sp.utterances, entry.genres, entry.violence_label)
        screenplays.append(sp)
    buf = io.StringIO()
    ingest.write_dataset(screenplays, buf)
    _write_text(cfg.out / DATASET, buf.getvalue())
    print(f"ingested {len(screenplays)} screenplays, {sum(len(s.utterances) for s in screenplays)} utterances")


def cmd_train(cfg: RunConfig) -> None:
    """Cross-validate and train the window classifier."""
    cfg.require("manifest")
    movies = _featurizer(cfg)(_dataset(cfg))
    labeled = [m for m in movies if m.label is not None]
    tc = cfg.train
    if len(labeled) < tc.folds:
        raise ValidationError(f"{len(labeled)} labeled movies cannot fill folds={tc.folds}; "
                              "need at least as many labeled movies as folds")
    model, report = train(labeled, tc)
    save_model(model, cfg.out / MODEL)
    _write_text(cfg.out / CV_REPORT, report.dumps())
    print(f"selected H={report.selected_hidden} "
          f"mean movie macro-F1={report.mean_movie_f1(report.selected_hidden):.4f} k={tc.k}")


def cmd_classify(cfg: RunConfig) -> None:
    """Write per-utterance violence posteriors."""
    model_path = cfg.out / MODEL
    if not model_path.exists():
        raise FileNotFoundError(f"model {model_path} not found; run 'train' first")
    model = load_model(model_path)
    movies = _featurizer(cfg)(_dataset(cfg))
    k = cfg.train.k
    rows, movie_rows = [], []
    for mv in movies:
        records, label = movie_posteriors(model, mv, k)
        rows.extend(r.row() for r in records)
        movie_rows.append([mv.movie_id, label.name, mv.label.name if mv.label is not None else "-", str(k)])
    _write_csv(cfg.out / POSTERIORS, POSTERIOR_HEADER, rows)
    _write_csv(cfg.out / MOVIES, ["movie_id", "predicted_label", "gold_label", "k"], movie_rows)
    print(f"classified {len(rows)} utterances in {len(movies)} movies (k={k})")


def _load_parses(path: Path):
    files = sorted(path.glob("*.conllu")) if path.is_dir() else [path]
    sentences = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            sentences.extend(ingest.load_conllu(fh))
    return sentences


def cmd_roles(cfg: RunConfig) -> None:
    """Extract roles and interactions from MED/HIGH utterances."""
    post_path = cfg.out / POSTERIORS
    if not post_path.exists():
        raise ValidationError(f"missing LOW-gate input: posterior file {post_path} not found; "
                              "run 'classify' first so LOW-violence utterances can be excluded")
    cfg.require("parses")
    with open(post_path, encoding="utf-8", newline="") as fh:
        predicted: dict[str, dict[int, Violence]] = defaultdict(dict)
        for r in read_posteriors(fh):
            predicted[r.movie_id][r.utterance_index] = r.predicted_class
    demographics = {}
    if cfg.demographics is not None:
        cfg.require("demographics")
        with open(cfg.demographics, encoding="utf-8", newline="") as fh:
            demographics = ingest.demographics_index(ingest.load_demographics(fh))
    screenplays = {sp.movie_id: sp for sp in _dataset(cfg)}
    by_movie = defaultdict(list)
    for sent in _load_parses(Path(cfg.parses)):
        by_movie[sent.movie_id].append(sent)
    triplets, assignments = [], []
    for movie_id in sorted(by_movie):
        sp = screenplays.get(movie_id)
        if sp is None:
            log.warning("parses for unknown movie %s ignored", movie_id)
            continue
        run = movie_roles(sp.utterances, by_movie[movie_id], predicted.get(movie_id, {}))
        triplets.extend(run.triplets)
        assignments.extend(run.assignments)
    pairs = collect_interactions(assignments, demographics)
    _write_csv(cfg.out / ROLES, ROLE_HEADER, (a.row() for a in assignments))
    _write_csv(cfg.out / INTERACTIONS, INTERACTION_HEADER, (p.row() for p in pairs))
    dist = form_distribution(triplets) if triplets else {f: 0.0 for f in Form}
    counts = Counter(t.form for t in triplets)
    _write_csv(cfg.out / FORMS, ["form", "count", "percent"],
               ([f.name, str(counts[f]), repr(dist[f])] for f in Form))
    print(f"{len(triplets)} triplets, {len(assignments)} role assignments, {len(pairs)} interactions")


def cmd_stats(cfg: RunConfig) -> None:
    """Run the role-frequency and interaction tests."""
    roles_path = cfg.out / ROLES
    if not roles_path.exists():
        raise FileNotFoundError(f"role file {roles_path} not found; run 'roles' first")
    cfg.require("demographics")
    with open(roles_path, encoding="utf-8", newline="") as fh:
        assignments = read_roles(fh)
    with open(cfg.demographics, encoding="utf-8", newline="") as fh:
        demographics = ingest.demographics_index(ingest.load_demographics(fh))
    pairs = collect_interactions(assignments, demographics)
    report = run_analysis(assignments, pairs, demographics, cfg.fixed_effect, cfg.omnibus_grouping)
    _write_text(cfg.out / STATS, report.dumps())
    _write_text(cfg.out / RESIDUALS, report.dumps_residuals())
    done = sum(r.result is not None for r in report.rows)
    print(f"{done} of {len(report.rows)} tests computed")


def _section(title: str, body: str) -> str:
    return f"== {title}\n{body.rstrip()}\n\n"


def cmd_report(cfg: RunConfig) -> None:
    """Merge all outputs into one summary."""
    out = []
    cv = cfg.out / CV_REPORT
    if cv.exists():
        data = json.loads(_read_text(cv))
        lines = [f"k={data['k']} seed={data['seed']} selected_hidden={data['selected_hidden']}"]
        for g in data["grid"]:
            lines.append(f"H={g['hidden']}: movie macro-F1 {g['mean_movie_macro_f1']:.4f}, "
                         f"window macro-F1 {g['mean_window_macro_f1']:.4f}")
        lines.append(f"final fit: {data['final_epochs']} epochs, converged={data['final_converged']}, "
                     f"training movie macro-F1 {data['train_movie_macro_f1']:.4f}")
        out.append(_section("cross-validation", "\n".join(lines)))
    movies = cfg.out / MOVIES
    if movies.exists():
        with open(movies, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        pred = [Violence.parse(r["predicted_label"]) for r in rows if r["gold_label"] != "-"]
        gold = [Violence.parse(r["gold_label"]) for r in rows if r["gold_label"] != "-"]
        lines = [f"{r['movie_id']}: predicted {r['predicted_label']} gold {r['gold_label']}" for r in rows]
        if gold:
            lines.append(f"movie-level macro-F1 on labeled movies: {macro_f1(pred, gold, CLASSES):.4f}")
        out.append(_section("movie labels", "\n".join(lines)))
    post = cfg.out / POSTERIORS
    if post.exists():
        with open(post, encoding="utf-8", newline="") as fh:
            recs = read_posteriors(fh)
        c = Counter(r.predicted_class for r in recs)
        out.append(_section("utterance predictions",
                            "\n".join(f"{v.name}: {c[v]}" for v in CLASSES)))
    for title, name in (("SVO forms", FORMS), ("statistical tests", STATS), ("interaction residuals", RESIDUALS)):
        path = cfg.out / name
        if path.exists():
            out.append(_section(title, _read_text(path)))
    if not out:
        raise ValidationError(f"nothing to report in {cfg.out}")
    _write_text(cfg.out / REPORT, "".join(out))
    print(f"wrote {cfg.out / REPORT}")


def gradcheck_suite(n_configs: int = 20, epsilon: float = 1e-5) -> float:
    """Max relative gradient error over seeded random tiny models (H in {2, 4}, T <= 5, D <= 10)."""
    worst = 0.0
    for s in range(n_configs):
        rng = np.random.default_rng(s)
        H = (2, 4)[s % 2]
        D = int(rng.integers(1, 11))
        T = int(rng.integers(1, 6))
        G = int(rng.integers(0, 4))
        m = zero_model(D, H, G, seed=s)
        # unit-scale weights keep every gradient entry well above difference noise
        for _, arr in m.tensors():
            arr[...] = rng.uniform(-1.0, 1.0, size=arr.shape)
        batch = [(rng.normal(size=(T, D)), (rng.random(G) < 0.5).astype(float), int(rng.integers(3)))
                 for _ in range(2)]
        worst = max(worst, finite_diff_check(m, batch, epsilon))
    return worst


def cmd_check(cfg: RunConfig) -> None:
    """Finite-difference gradient check and invariant self-tests."""
    failures = []
    err = gradcheck_suite()
    print(f"gradcheck max_rel_err={err:.3e}")
    if not err < 1e-4:
        failures.append("gradcheck")

    rng = np.random.default_rng(cfg.train.seed)
    m = zero_model(5, 3, 2)
    for _, arr in m.tensors():
        arr[...] = rng.normal(size=arr.shape)
    text = dumps_model(m)
    if dumps_model(loads_model(text)) != text:
        failures.append("model round trip")

    feats = rng.normal(size=(7, 5))
    sp = ingest.Screenplay("check", "", tuple(ingest.Utterance("check", i, "A", "x") for i in range(7)))
    mv = FeaturizedScreenplay(sp, feats, np.zeros(2))
    for k in (2, 4, 10):
        wins = make_windows(mv, k)
        if len(wins) != 7 or any(not np.array_equal(w.features[k // 2], feats[w.center_index]) for w in wins):
            failures.append(f"windows k={k}")
        recs, _ = movie_posteriors(m, mv, k)
        if any(abs(sum(r.class_probs) - 1.0) > 1e-12 for r in recs):
            failures.append(f"softmax normalization k={k}")

    a, b = rng.normal(size=6), rng.normal(size=9)
    t = t_test_two_sample(a, b).statistic
    f = anova_oneway([a, b]).statistic
    if abs(f - t * t) > 1e-9:
        failures.append("F = t^2")
    print("invariants " + ("ok" if not failures else "FAILED: " + ", ".join(failures)))
    if failures:
        raise ValidationError("self-check failed: " + ", ".join(failures))


HANDLERS = {
    "ingest": cmd_ingest, "train": cmd_train, "classify": cmd_classify, "roles": cmd_roles,
    "stats": cmd_stats, "report": cmd_report, "check": cmd_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with a [run] section")
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=int, help="context window parameter (even)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--log-level", dest="log_level")
    for key in PATH_KEYS:
        common.add_argument(f"--{key.replace('_', '-')}", dest=key, type=Path)
    common.add_argument("--folds", type=int)
    common.add_argument("--max-epochs", dest="max_epochs", type=int)
    common.add_argument("--hidden-grid", dest="hidden_grid", help="e.g. '4,8,16,32'")

    parser = _Parser(prog="scriptviolence", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}", parser_class=_Parser)
    sub.required = True
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__)
    return parser


def run_command(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        logging.basicConfig(level=cfg.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
        cfg.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
