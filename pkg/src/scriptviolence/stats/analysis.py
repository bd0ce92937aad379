"""Corpus analyses: role frequency by demographics and victim/perpetrator interaction tests."""
from __future__ import annotations

import csv
import io
import itertools
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import ValidationError
from ..ingest import DemographicRecord, Gender, Race, Violence
from ..roles import InteractionPair, Role, RoleAssignment
from .testing import (
    ContingencyTable,
    StatResult,
    anova_oneway,
    bonferroni,
    pearson_residuals,
    prop_test_two,
    residualize_fixed_effect,
    stars,
    t_test_two_sample,
)

log = logging.getLogger(__name__)

LEVELS = (Violence.HIGH, Violence.MED)
ROLES = (Role.VICTIM, Role.PERPETRATOR, Role.NARRATOR)
KNOWN_RACES = tuple(r for r in Race if r is not Race.UNKNOWN)


@dataclass
class ReportRow:
    test_kind: str
    grouping: str
    result: StatResult | None = None
    note: str = ""

    def cells(self) -> list[str]:
        r = self.result
        if r is None:
            return [self.test_kind, self.grouping, "", "", "", "", "", "", self.note]
        fmt = lambda v: "" if v is None else repr(float(v))  # noqa: E731
        return [self.test_kind, self.grouping, fmt(r.statistic), fmt(r.df1), fmt(r.df2), fmt(r.p_value),
                fmt(r.p_adjusted), stars(r.p_adjusted if r.p_adjusted is not None else r.p_value), self.note]


REPORT_HEADER = ["test_kind", "grouping", "statistic", "df1", "df2", "p_value", "p_adjusted", "stars", "note"]


@dataclass
class StatsReport:
    rows: list[ReportRow] = field(default_factory=list)
    residuals: list[tuple[str, ContingencyTable, np.ndarray]] = field(default_factory=list)

    def dumps(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for row in self.rows:
            w.writerow(row.cells())
        return buf.getvalue()

    def dumps_residuals(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "perpetrator", "victim", "observed", "z"])
        for name, table, z in self.residuals:
            for i, r in enumerate(table.row_labels):
                for j, c in enumerate(table.col_labels):
                    w.writerow([name, r, c, int(table.counts[i, j]), repr(float(z[i, j]))])
        return buf.getvalue()


def _attempt(kind: str, grouping: str, fn, *args) -> ReportRow:
    try:
        return ReportRow(kind, grouping, fn(*args))
    except ValidationError as exc:
        log.info("%s %s skipped: %s", kind, grouping, exc)
        return ReportRow(kind, grouping, None, f"skipped: {exc}")


# --------------------------------------------------------------------------
# role frequency


def character_role_rates(assignments: Iterable[RoleAssignment], level: Violence,
                         role: Role) -> dict[tuple[str, str], float]:
    """Per speaking character: share of their triplets at ``level`` in which they hold ``role``."""
    hits: Counter = Counter()
    totals: Counter = Counter()
    for a in assignments:
        if a.violence_level is not level:
            continue
        key = (a.triplet.movie_id, a.speaker_id)
        totals[key] += 1
        hits[key] += a.speaker_role is role
    return {k: hits[k] / totals[k] for k in sorted(totals)}


def role_observations(assignments: Sequence[RoleAssignment], level: Violence, role: Role,
                      fixed_effect: str = "movie") -> dict[tuple[str, str], float]:
    """Per-character role rates with a fixed effect removed by group demeaning.

    ``fixed_effect`` is ``"movie"``, ``"speaker"`` or ``"none"``. Speaker-level
    demeaning of per-speaker rates leaves all zeros, so every downstream test
    reports degenerate variance; it is kept for completeness.
    """
    rates = character_role_rates(assignments, level, role)
    if not rates or fixed_effect == "none":
        return rates
    keys = list(rates)
    if fixed_effect == "movie":
        groups = [k[0] for k in keys]
    elif fixed_effect == "speaker":
        groups = keys
    else:
        raise ValidationError(f"unknown fixed effect {fixed_effect!r}")
    return dict(zip(keys, residualize_fixed_effect([rates[k] for k in keys], groups)))


def role_frequency_tests(assignments: Sequence[RoleAssignment],
                         demographics: Mapping[tuple[str, str], DemographicRecord],
                         fixed_effect: str = "movie") -> list[ReportRow]:
    """Gender t-test (female minus male) and race ANOVA per violence level and role."""
    rows = []
    for level, role in itertools.product(LEVELS, ROLES):
        obs = role_observations(assignments, level, role, fixed_effect)
        by_gender: dict[Gender, list[float]] = defaultdict(list)
        by_race: dict[Race, list[float]] = defaultdict(list)
        for key, value in obs.items():
            rec = demographics.get(key)
            if rec is None:
                continue
            by_gender[rec.gender].append(value)
            by_race[rec.race].append(value)
        label = f"{role.name} {level.name} fixed_effect={fixed_effect}"
        rows.append(_attempt("T_TEST", f"{label} FEMALE-vs-MALE", t_test_two_sample,
                             by_gender[Gender.FEMALE], by_gender[Gender.MALE]))
        race_groups = [r for r in KNOWN_RACES if by_race.get(r)]
        rows.append(_attempt("ANOVA_F", f"{label} race[{'|'.join(r.name for r in race_groups)}]",
                             anova_oneway, [by_race[r] for r in race_groups]))
    return rows


# --------------------------------------------------------------------------
# interactions


def _party(demo: tuple[Gender, Race], grouping: str) -> str:
    gender, race = demo
    if grouping == "gender":
        return gender.name
    if grouping == "race":
        return race.name
    if grouping == "gender_race":
        return f"{gender.name}/{race.name}"
    raise ValidationError(f"unknown interaction grouping {grouping!r}")


def interaction_category(pair: InteractionPair, grouping: str) -> str:
    return f"{_party(pair.perpetrator_demo, grouping)}->{_party(pair.victim_demo, grouping)}"


def _known(pair: InteractionPair, grouping: str) -> bool:
    parts = [p for demo in (pair.perpetrator_demo, pair.victim_demo) for p in demo]
    if grouping == "gender":
        parts = [pair.perpetrator_demo[0], pair.victim_demo[0]]
    elif grouping == "race":
        parts = [pair.perpetrator_demo[1], pair.victim_demo[1]]
    return all(p.name != "UNKNOWN" for p in parts)


def interaction_omnibus(pairs: Sequence[InteractionPair], grouping: str = "gender_race") -> ReportRow:
    """ANOVA of per-movie interaction counts across the observed interaction categories."""
    pairs = [p for p in pairs if _known(p, grouping)]
    cats = sorted({interaction_category(p, grouping) for p in pairs})
    movies = sorted({p.movie_id for p in pairs})
    counts = Counter((p.movie_id, interaction_category(p, grouping)) for p in pairs)
    groups = [[float(counts[(m, c)]) for m in movies] for c in cats]
    return _attempt("ANOVA_F", f"interactions by {grouping} ({len(cats)} categories x {len(movies)} movies)",
                    anova_oneway, groups)


def interaction_pairwise(pairs: Sequence[InteractionPair], grouping: str = "gender") -> list[ReportRow]:
    """Pairwise two-proportion tests between interaction categories, Bonferroni-adjusted.

    Each category's proportion is its count over all known-demographic pairs.
    """
    pairs = [p for p in pairs if _known(p, grouping)]
    counts = Counter(interaction_category(p, grouping) for p in pairs)
    n = len(pairs)
    cats = sorted(counts)
    combos = list(itertools.combinations(cats, 2))
    if not combos:
        return [ReportRow("CHI2_PROP", f"interactions by {grouping}", None,
                          "skipped: fewer than two interaction categories")]
    results = [prop_test_two(counts[a], n, counts[b], n) for a, b in combos]
    adjusted = bonferroni([r.p_value for r in results])
    return [ReportRow("CHI2_PROP", f"{a} vs {b} (n={n})", r.with_adjusted(p))
            for (a, b), r, p in zip(combos, results, adjusted)]


def interaction_residuals(pairs: Sequence[InteractionPair], grouping: str = "race") -> tuple[ContingencyTable, np.ndarray] | None:
    """Pearson residuals of the perpetrator x victim contingency table (empty rows/cols dropped)."""
    pairs = [p for p in pairs if _known(p, grouping)]
    if not pairs:
        return None
    labels = sorted({_party(d, grouping) for p in pairs for d in (p.perpetrator_demo, p.victim_demo)})
    pos = {l: i for i, l in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=int)
    for p in pairs:
        counts[pos[_party(p.perpetrator_demo, grouping)], pos[_party(p.victim_demo, grouping)]] += 1
    table = ContingencyTable(tuple(labels), tuple(labels), counts).drop_empty()
    if table.counts.size == 0:
        return None
    return table, pearson_residuals(table)


def run_analysis(assignments: Sequence[RoleAssignment], pairs: Sequence[InteractionPair],
                 demographics: Mapping[tuple[str, str], DemographicRecord], fixed_effect: str = "movie",
                 omnibus_grouping: str = "gender_race") -> StatsReport:
    report = StatsReport()
    report.rows.extend(role_frequency_tests(assignments, demographics, fixed_effect))
    report.rows.append(interaction_omnibus(pairs, omnibus_grouping))
    report.rows.extend(interaction_pairwise(pairs, "gender"))
    for grouping in ("race", "gender"):
        res = interaction_residuals(pairs, grouping)
        if res is not None:
            report.residuals.append((grouping, *res))
    return report
