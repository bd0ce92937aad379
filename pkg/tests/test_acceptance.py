"""Acceptance criteria 1-9, one test each.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line to the terminal
(even under pytest's output capture) and then asserts the criterion.
"""
import csv
import io
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats as ss
from scipy.stats.contingency import expected_freq
from sklearn.metrics import f1_score

from corpus import PIPELINE, run_pipeline, write_corpus
from helpers import marker_corpus, movie, random_model
from scriptviolence.cli import gradcheck_suite, run_command
from scriptviolence.ingest import Violence, load_conllu, read_dataset
from scriptviolence.neural.model import zero_model
from scriptviolence.neural.serialize import dumps_model, load_model, loads_model, save_model
from scriptviolence.pipeline import TrainConfig, make_windows, train
from scriptviolence.roles import ROLE_HEADER, Form, extract_svo, filter_forms, form_distribution, movie_roles
from scriptviolence.stats import (
    ContingencyTable,
    Dist,
    anova_oneway,
    dist_cdf,
    macro_f1,
    pearson_residuals,
    prop_test_two,
    t_test_two_sample,
)

FIXTURES = Path(__file__).parent / "fixtures"
ORACLE_LEVELS = "HHMHMHHMMHHMMMHMMHHHMMHMMMMHHH"


@pytest.fixture
def verdict(capsys):
    def emit(n: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
        assert ok, f"criterion {n} failed: {detail}"
    return emit


def test_1_gradient_check(verdict):
    start = time.perf_counter()
    err = gradcheck_suite(20)
    elapsed = time.perf_counter() - start
    verdict(1, "gradient check", err < 1e-4 and elapsed < 10.0,
            f"max rel err {err:.2e} over 20 configs, {elapsed:.2f}s")


def test_2_trainability(verdict):
    # a high learning rate without dropout lets the loss settle under the 1e-8 delta rule
    details, ok = [], True
    start = time.perf_counter()
    for seed in range(3):
        cfg = TrainConfig(k=4, learning_rate=0.1, dropout_keep=1.0, max_epochs=200, seed=seed, hidden_grid=(32,))
        _, report = train(marker_corpus(seed=seed), cfg)
        ok &= report.final_converged and report.train_movie_f1 == 1.0
        details.append(f"seed {seed}: {report.final_epochs} epochs, converged={report.final_converged}, "
                       f"train F1={report.train_movie_f1}")
    elapsed = time.perf_counter() - start
    verdict(2, "trainability", ok and elapsed < 60.0, "; ".join(details) + f"; {elapsed:.1f}s")


def test_3_windowing(verdict):
    bad = []
    for k in (2, 4, 10):
        for L in range(1, 21):
            feats = np.random.default_rng(100 * k + L).normal(size=(L, 3)) + 1.0
            wins = make_windows(movie("m", feats), k)
            if len(wins) != L:
                bad.append(f"k={k} L={L} count={len(wins)}")
                continue
            for t, w in enumerate(wins):
                if not np.array_equal(w.features[k // 2], feats[t]):
                    bad.append(f"k={k} L={L} t={t} center")
                for slot in range(k + 1):
                    src = t - k // 2 + slot
                    outside = not 0 <= src < L
                    if outside and (not w.padding[slot] or np.any(w.features[slot] != 0)):
                        bad.append(f"k={k} L={L} t={t} slot={slot} padding")
    verdict(3, "windowing", not bad, f"{len(bad)} violations over 60 movie/k combinations")


def test_4_determinism(verdict, tmp_path):
    corpus = write_corpus(tmp_path / "corpus")
    a, b = tmp_path / "run_a", tmp_path / "run_b"
    codes = run_pipeline(corpus, a, seed=11) + run_pipeline(corpus, b, seed=11)
    files_a = sorted(p.name for p in a.iterdir())
    same = files_a == sorted(p.name for p in b.iterdir()) and all(
        (a / n).read_bytes() == (b / n).read_bytes() for n in files_a)
    verdict(4, "determinism", codes == [0] * (2 * len(PIPELINE)) and same and len(files_a) >= 11,
            f"exit codes {codes}, {len(files_a)} files compared byte for byte")


def _oracle():
    (sp,) = read_dataset((FIXTURES / "roles_dialogue.jsonl").read_text(encoding="utf-8"))
    sents = load_conllu((FIXTURES / "roles_oracle.conllu").read_text(encoding="utf-8"))
    levels = {i: Violence.HIGH if c == "H" else Violence.MED for i, c in enumerate(ORACLE_LEVELS)}
    return sp, sents, levels


def test_5_role_oracle(verdict):
    sp, sents, levels = _oracle()
    with open(FIXTURES / "roles_expected.csv", encoding="utf-8", newline="") as fh:
        expected = list(csv.reader(fh))
    got = [a.row() for a in movie_roles(sp.utterances, sents, levels).assignments]
    narrator = ["fx", "2", "REX", "NARRATOR", "attack", "-", "-", "MED"]
    mismatches = sum(g != e for g, e in zip(got, expected[1:])) + abs(len(got) - (len(expected) - 1))
    verdict(5, "role oracle", expected[0] == ROLE_HEADER and got == expected[1:] and len(got) == 30
            and narrator in got, f"{len(got)} assignments, {mismatches} mismatches against the hand labels")


def test_6_form_filter(verdict):
    _, sents, _ = _oracle()
    triplets = [t for s in sents for t in extract_svo(s)]
    kept = filter_forms(triplets)
    # independent oracle: pronoun subject with pronoun or proper-noun object
    want = [t for t in triplets if t.subject.upos == "PRON" and t.object.upos in ("PRON", "PROPN")]
    dist = form_distribution(triplets)
    total = sum(dist.values())
    ok = kept == want and {t.form for t in kept} <= {Form.PVP, Form.PVPN} and len(kept) == 30 \
        and abs(total - 100.0) <= 1e-9
    verdict(6, "form filter", ok, f"{len(kept)} of {len(triplets)} triplets kept, distribution sums to {total!r}")


def test_7_statistics_oracles(verdict):
    rng = np.random.default_rng(2024)
    worst_stat = worst_p = worst_ft = 0.0

    def stat(a, b):
        nonlocal worst_stat
        worst_stat = max(worst_stat, abs(a - b))

    def pval(a, b):
        nonlocal worst_p
        worst_p = max(worst_p, abs(a - b))

    classes = ["LOW", "MED", "HIGH"]
    for _ in range(50):
        a = rng.normal(size=int(rng.integers(2, 12)))
        b = rng.normal(loc=rng.normal(), size=int(rng.integers(2, 12)))
        r, ref = t_test_two_sample(a, b), ss.ttest_ind(a, b)
        stat(r.statistic, ref.statistic)
        pval(r.p_value, ref.pvalue)

        groups = [rng.normal(loc=rng.normal(), size=int(rng.integers(2, 8))) for _ in range(int(rng.integers(2, 6)))]
        r, ref = anova_oneway(groups), ss.f_oneway(*groups)
        stat(r.statistic, ref.statistic)
        pval(r.p_value, ref.pvalue)

        f2 = anova_oneway([a, b]).statistic
        worst_ft = max(worst_ft, abs(f2 - t_test_two_sample(a, b).statistic ** 2))

        while True:
            n1, n2 = (int(v) for v in rng.integers(1, 80, size=2))
            x1, x2 = int(rng.integers(0, n1 + 1)), int(rng.integers(0, n2 + 1))
            if 0 < x1 + x2 < n1 + n2:
                break
        r = prop_test_two(x1, n1, x2, n2)
        chi2, p, _, _ = ss.chi2_contingency([[x1, n1 - x1], [x2, n2 - x2]], correction=False)
        stat(r.statistic, chi2)
        pval(r.p_value, p)

        v, x = float(rng.uniform(0.5, 60)), float(rng.normal(scale=3))
        d1, d2, k = float(rng.uniform(0.5, 40)), float(rng.uniform(0.5, 40)), float(rng.uniform(0.5, 40))
        y = float(rng.exponential(3))
        pval(dist_cdf(Dist.STUDENT_T, v, x), ss.t.cdf(x, v))
        pval(dist_cdf(Dist.FISHER_F, (d1, d2), y), ss.f.cdf(y, d1, d2))
        pval(dist_cdf(Dist.CHI_SQUARED, k, y), ss.chi2.cdf(y, k))

        O = rng.integers(1, 25, size=(int(rng.integers(2, 5)), int(rng.integers(2, 5))))
        E = expected_freq(O)
        z = pearson_residuals(ContingencyTable(tuple(range(O.shape[0])), tuple(range(O.shape[1])), O))
        stat(float(np.max(np.abs(z - (O - E) / np.sqrt(E)))), 0.0)

        n = int(rng.integers(1, 15))
        gold = list(rng.choice(classes, size=n))
        pred = list(rng.choice(classes, size=n))
        stat(macro_f1(pred, gold, classes), f1_score(gold, pred, labels=classes, average="macro", zero_division=0))

    ok = worst_stat < 1e-8 and worst_p < 1e-6 and worst_ft < 1e-9
    verdict(7, "statistics oracles", ok,
            f"50 instances per test: max stat err {worst_stat:.1e}, max p err {worst_p:.1e}, max |F - t^2| {worst_ft:.1e}")


def test_8_low_gate(verdict, tmp_path):
    corpus = write_corpus(tmp_path / "corpus")
    out = tmp_path / "out"
    cfg = tmp_path / "run.ini"
    cfg.write_text(corpus.config_text(out, k=4), encoding="utf-8")
    codes = [run_command(["ingest", "--config", str(cfg)])]
    # features are 6 embedding dims + 2 sentiment dims; 5 genres
    m = zero_model(8, 2, 5)
    m.output.b_o[:] = [10.0, 0.0, 0.0]
    out.mkdir(exist_ok=True)
    save_model(m, out / "model.txt")
    codes += [run_command([c, "--config", str(cfg)]) for c in ("classify", "roles")]
    with open(out / "posteriors.csv", encoding="utf-8", newline="") as fh:
        predicted = {r[-1] for r in list(csv.reader(fh))[1:]}
    role_lines = (out / "roles.csv").read_text(encoding="utf-8").splitlines()
    pair_lines = (out / "interactions.csv").read_text(encoding="utf-8").splitlines()
    # library path too: the oracle fixture yields nothing when every utterance is LOW
    sp, sents, _ = _oracle()
    run = movie_roles(sp.utterances, sents, {i: Violence.LOW for i in range(30)})
    ok = codes == [0, 0, 0] and predicted == {"LOW"} and len(role_lines) == 1 and len(pair_lines) == 1 \
        and not run.triplets and not run.assignments
    verdict(8, "LOW gate", ok, f"predicted classes {sorted(predicted)}, {len(role_lines) - 1} role rows, "
                               f"{len(pair_lines) - 1} interaction rows")


def test_9_persistence(verdict, tmp_path):
    bad = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        D, H, G = (int(v) for v in rng.integers(1, 9, size=3))
        m = random_model(D, H, G, seed=seed, scale=float(rng.uniform(1e-3, 1e3)))
        path = tmp_path / f"m{seed}.txt"
        save_model(m, path)
        first = path.read_bytes()
        back = load_model(path)
        save_model(back, path)
        same_params = all(np.array_equal(x, y) for (_, x), (_, y) in zip(m.tensors(), back.tensors()))
        bad += not (first == path.read_bytes() and same_params and dumps_model(loads_model(io.StringIO(
            first.decode("utf-8")))) == first.decode("utf-8"))
    verdict(9, "model persistence", bad == 0, f"{10 - bad} of 10 random models round-trip byte for byte")
