"""Statistical tests and the distribution functions behind their p-values."""
from .special import Dist, betainc, dist_cdf, dist_sf, gammainc, gammaincc
from .testing import (
    ContingencyTable,
    StatResult,
    TestKind,
    anova_oneway,
    bonferroni,
    macro_f1,
    pearson_residuals,
    prop_test_two,
    residualize_fixed_effect,
    stars,
    t_test_two_sample,
)

__all__ = [
    "ContingencyTable", "Dist", "StatResult", "TestKind", "anova_oneway", "betainc", "bonferroni",
    "dist_cdf", "dist_sf", "gammainc", "gammaincc", "macro_f1", "pearson_residuals", "prop_test_two",
    "residualize_fixed_effect", "stars", "t_test_two_sample",
]
