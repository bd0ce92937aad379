"""Hypothesis tests, fixed-effect residualization, residuals and macro-F1."""
from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from ..errors import DegenerateVarianceError, TooFewGroupsError, ValidationError, ZeroMarginalError
from .special import Dist, dist_sf


class TestKind(enum.Enum):
    __test__ = False  # not a pytest class

    T_TEST = "T_TEST"
    ANOVA_F = "ANOVA_F"
    CHI2_PROP = "CHI2_PROP"


@dataclass(frozen=True)
class StatResult:
    test_kind: TestKind
    statistic: float
    df1: float
    df2: float | None
    p_value: float
    p_adjusted: float | None = None

    def with_adjusted(self, p_adjusted: float) -> "StatResult":
        return StatResult(self.test_kind, self.statistic, self.df1, self.df2, self.p_value, p_adjusted)


def _clip01(p: float) -> float:
    return min(1.0, max(0.0, p))


def residualize_fixed_effect(values: Sequence[float], group_ids: Sequence[Hashable]) -> list[float]:
    """Subtract each observation's group mean (least squares on group dummies)."""
    if len(values) != len(group_ids):
        raise ValidationError(f"{len(values)} values but {len(group_ids)} group ids")
    if not values:
        raise ValidationError("no observations")
    sums: dict = defaultdict(float)
    counts: dict = defaultdict(int)
    for v, g in zip(values, group_ids):
        sums[g] += v
        counts[g] += 1
    return [float(v - sums[g] / counts[g]) for v, g in zip(values, group_ids)]


def t_test_two_sample(a: Sequence[float], b: Sequence[float]) -> StatResult:
    """Pooled-variance Student t with a two-sided p-value."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 < 2 or n2 < 2:
        raise ValidationError("t-test needs at least two observations per sample")
    df = n1 + n2 - 2
    ss = np.sum((a - a.mean()) ** 2) + np.sum((b - b.mean()) ** 2)
    pooled = ss / df
    if not pooled > 0:
        raise DegenerateVarianceError("pooled variance is zero")
    t = float((a.mean() - b.mean()) / math.sqrt(pooled * (1.0 / n1 + 1.0 / n2)))
    p = 2.0 * dist_sf(Dist.STUDENT_T, df, abs(t))
    return StatResult(TestKind.T_TEST, t, float(df), None, _clip01(p))


def anova_oneway(groups: Sequence[Sequence[float]]) -> StatResult:
    """One-way ANOVA F = between-group mean square / within-group mean square."""
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2:
        raise TooFewGroupsError("ANOVA needs at least two groups")
    if any(len(g) == 0 for g in arrays):
        raise ValidationError("ANOVA groups must be nonempty")
    k = len(arrays)
    n = sum(len(g) for g in arrays)
    if n <= k:
        raise ValidationError("ANOVA needs more observations than groups")
    grand = np.concatenate(arrays).mean()
    ss_between = sum(len(g) * (g.mean() - grand) ** 2 for g in arrays)
    ss_within = sum(np.sum((g - g.mean()) ** 2) for g in arrays)
    df1, df2 = k - 1, n - k
    if not ss_within > 0:
        raise DegenerateVarianceError("within-group variance is zero")
    f = float((ss_between / df1) / (ss_within / df2))
    return StatResult(TestKind.ANOVA_F, f, float(df1), float(df2), _clip01(dist_sf(Dist.FISHER_F, (df1, df2), f)))


def prop_test_two(x1: int, n1: int, x2: int, n2: int) -> StatResult:
    """Pooled two-proportion chi-squared test, df = 1, no continuity correction."""
    for x, n in ((x1, n1), (x2, n2)):
        if n <= 0 or x < 0 or x > n:
            raise ValidationError(f"invalid proportion {x}/{n}")
    p1, p2 = x1 / n1, x2 / n2
    pooled = (x1 + x2) / (n1 + n2)
    denom = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    # pooled of 0 or 1 means both proportions coincide
    chi2 = 0.0 if denom == 0 else (p1 - p2) ** 2 / denom
    return StatResult(TestKind.CHI2_PROP, float(chi2), 1.0, None, _clip01(dist_sf(Dist.CHI_SQUARED, 1, chi2)))


def bonferroni(p_values: Sequence[float]) -> list[float]:
    m = len(p_values)
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"p-value {p} outside [0, 1]")
    return [min(1.0, p * m) for p in p_values]


@dataclass(frozen=True)
class ContingencyTable:
    row_labels: tuple
    col_labels: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValidationError("contingency counts do not match label dimensions")
        if np.any(counts < 0):
            raise ValidationError("negative contingency count")
        object.__setattr__(self, "counts", counts)

    def drop_empty(self) -> "ContingencyTable":
        """Remove all-zero rows and columns."""
        rows = self.counts.sum(axis=1) > 0
        cols = self.counts.sum(axis=0) > 0
        return ContingencyTable(tuple(l for l, k in zip(self.row_labels, rows) if k),
                                tuple(l for l, k in zip(self.col_labels, cols) if k),
                                self.counts[np.ix_(rows, cols)])


def pearson_residuals(table: ContingencyTable) -> np.ndarray:
    """(observed - expected) / sqrt(expected) with independence expectations."""
    O = table.counts.astype(np.float64)
    rows, cols = O.sum(axis=1), O.sum(axis=0)
    total = O.sum()
    if total <= 0 or np.any(rows == 0) or np.any(cols == 0):
        raise ZeroMarginalError("contingency table has an empty row or column")
    E = np.outer(rows, cols) / total
    return (O - E) / np.sqrt(E)


def macro_f1(predictions: Sequence, gold: Sequence, classes: Sequence) -> float:
    """Unweighted mean of per-class F1; a class absent everywhere scores 0."""
    if len(predictions) != len(gold):
        raise ValidationError(f"{len(predictions)} predictions but {len(gold)} gold labels")
    if not gold:
        raise ValidationError("macro_f1 needs at least one item")
    scores = []
    for c in classes:
        tp = sum(p == c and g == c for p, g in zip(predictions, gold))
        fp = sum(p == c and g != c for p, g in zip(predictions, gold))
        fn = sum(p != c and g == c for p, g in zip(predictions, gold))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(sum(scores) / len(classes))


def stars(p: float | None) -> str:
    if p is None:
        return ""
    if p < 0.001:
        return "***"
    if p < 0.005:
        return "**"
    if p < 0.05:
        return "*"
    return ""
