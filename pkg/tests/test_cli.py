import csv
import json

import numpy as np
import pytest

from corpus import FAST_RUN, PIPELINE, run_pipeline, write_corpus
from helpers import random_model
from scriptviolence.cli import gradcheck_suite, load_config, run_command
from scriptviolence.errors import ValidationError
from scriptviolence.neural.serialize import dumps_model
from scriptviolence.pipeline import POSTERIOR_HEADER
from scriptviolence.roles import ROLE_HEADER


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="module")
def run_dir(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    assert run_pipeline(corpus, out) == [0] * len(PIPELINE)
    return out


def rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_check(capsys, tmp_path):
    assert run_command(["check", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    line = next(l for l in out.splitlines() if l.startswith("gradcheck"))
    assert float(line.split("=")[1]) < 1e-4
    assert "invariants ok" in out


def test_gradcheck_suite_bound():
    assert gradcheck_suite(4) < 1e-4


def test_unknown_subcommand(capsys):
    assert run_command(["dance"]) == 1
    assert "invalid choice" in capsys.readouterr().err


def test_missing_subcommand():
    assert run_command([]) == 1


class TestEndToEnd:
    def test_outputs_present(self, run_dir):
        names = {p.name for p in run_dir.iterdir()}
        assert {"dataset.jsonl", "model.txt", "cv_report.json", "posteriors.csv", "movies.csv", "roles.csv",
                "interactions.csv", "forms.csv", "stats_report.csv", "residuals.csv", "report.txt"} <= names

    def test_posteriors(self, run_dir, corpus):
        table = rows(run_dir / "posteriors.csv")
        assert table[0] == POSTERIOR_HEADER
        assert {r[0] for r in table[1:]} == set(corpus.movies)
        for r in table[1:]:
            probs = [float(v) for v in r[2:5]]
            assert abs(sum(probs) - 1) < 1e-12

    def test_low_utterances_never_in_roles(self, run_dir):
        low = {(r[0], r[1]) for r in rows(run_dir / "posteriors.csv")[1:] if r[-1] == "LOW"}
        roles = rows(run_dir / "roles.csv")
        assert roles[0] == ROLE_HEADER and len(roles) > 1
        assert not any((r[0], r[1]) in low for r in roles[1:])
        assert all(r[-1] in ("MED", "HIGH") for r in roles[1:])

    def test_cv_report(self, run_dir):
        rep = json.loads((run_dir / "cv_report.json").read_text(encoding="utf-8"))
        assert rep["selected_hidden"] == 8 and len(rep["folds"]) == 3

    def test_forms_sum(self, run_dir):
        table = rows(run_dir / "forms.csv")[1:]
        assert sum(float(r[2]) for r in table) == pytest.approx(100.0, abs=1e-9)

    def test_report_sections(self, run_dir):
        text = (run_dir / "report.txt").read_text(encoding="utf-8")
        assert text.count("== ") >= 3


def test_train_too_few_movies(tmp_path, capsys):
    c = write_corpus(tmp_path / "c", labels=("LOW", "MED", "HIGH"), unlabeled=0)
    out = tmp_path / "out"
    cfg = tmp_path / "run.ini"
    cfg.write_text(c.config_text(out, **{**FAST_RUN, "folds": 5}), encoding="utf-8")
    assert run_command(["ingest", "--config", str(cfg)]) == 0
    assert run_command(["train", "--config", str(cfg)]) == 1
    assert "cannot fill folds=5" in capsys.readouterr().err


def test_roles_requires_posteriors(tmp_path, corpus, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(corpus.config_text(tmp_path / "out"), encoding="utf-8")
    assert run_command(["ingest", "--config", str(cfg)]) == 0
    assert run_command(["roles", "--config", str(cfg)]) == 1
    assert "missing LOW-gate input" in capsys.readouterr().err


def test_model_version_rejected(tmp_path, corpus, capsys):
    out = tmp_path / "out"
    out.mkdir()
    text = dumps_model(random_model(6 + 2, 2, 5, seed=0))
    (out / "model.txt").write_text(text.replace("format=1", "format=2", 1), encoding="utf-8")
    cfg = tmp_path / "run.ini"
    cfg.write_text(corpus.config_text(out, k=4), encoding="utf-8")
    assert run_command(["ingest", "--config", str(cfg)]) == 0
    assert run_command(["classify", "--config", str(cfg)]) == 1
    assert "version" in capsys.readouterr().err.lower()


def test_missing_input_is_io_error(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\nscripts = {tmp_path / 'nope'}\nout = {tmp_path / 'out'}\n", encoding="utf-8")
    assert run_command(["ingest", "--config", str(cfg)]) == 2


class TestConfig:
    def test_file_then_flags(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[run]\nk = 8\nseed = 3\nhidden_grid = 4, 8\nscripts = s\n", encoding="utf-8")
        rc = load_config(cfg, {"k": 6, "seed": None})
        assert (rc.train.k, rc.train.seed, rc.train.hidden_grid) == (6, 3, (4, 8))
        assert rc.scripts == tmp_path / "s"

    def test_defaults(self):
        rc = load_config(None, {})
        assert rc.train.k == 500 and rc.train.hidden_grid == (4, 8, 16, 32)

    @pytest.mark.parametrize("body", ["[run]\nbogus = 1\n", "[run]\nk = many\n", "[other]\nk = 4\n",
                                      "[run]\nk = 3\n"])
    def test_invalid(self, tmp_path, body):
        cfg = tmp_path / "run.ini"
        cfg.write_text(body, encoding="utf-8")
        with pytest.raises(ValidationError):
            load_config(cfg, {})

    def test_flag_override_through_cli(self, tmp_path, corpus):
        cfg = tmp_path / "run.ini"
        cfg.write_text(corpus.config_text(tmp_path / "o1", k=500), encoding="utf-8")
        # an odd k from the command line is rejected even though the file is valid
        assert run_command(["check", "--config", str(cfg), "--k", "5"]) == 1
        assert np.isfinite(load_config(cfg, {"k": 4}).train.learning_rate)
