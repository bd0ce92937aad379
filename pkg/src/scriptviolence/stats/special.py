"""Regularized incomplete beta/gamma functions and the t, F and chi-squared distributions."""
from __future__ import annotations

import enum
import math

from ..errors import ValidationError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 100_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b) by the modified Lentz method."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if a <= 0 or b <= 0:
        raise ValidationError("betainc needs a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"betainc needs 0 <= x <= 1, got {x}")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the continued fraction converges fast only below the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _gamma_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ArithmeticError(f"incomplete gamma series did not converge for a={a}, x={x}")


def _gamma_cf(a: float, x: float) -> float:
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = _TINY if abs(d) < _TINY else d
        c = b + an / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ArithmeticError(f"incomplete gamma fraction did not converge for a={a}, x={x}")


def gammainc(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if a <= 0:
        raise ValidationError("gammainc needs a > 0")
    if x < 0:
        raise ValidationError("gammainc needs x >= 0")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammaincc(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValidationError("gammaincc needs a > 0")
    if x < 0:
        raise ValidationError("gammaincc needs x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


class Dist(enum.Enum):
    STUDENT_T = "STUDENT_T"
    FISHER_F = "FISHER_F"
    CHI_SQUARED = "CHI_SQUARED"


def _dfs(kind: Dist, params) -> tuple[float, ...]:
    dfs = tuple(float(p) for p in (params if isinstance(params, (tuple, list)) else (params,)))
    need = 2 if kind is Dist.FISHER_F else 1
    if len(dfs) != need:
        raise ValidationError(f"{kind.name} takes {need} degree(s) of freedom, got {len(dfs)}")
    if any(not d > 0 for d in dfs):
        raise ValidationError(f"degrees of freedom must be positive, got {dfs}")
    return dfs


def dist_cdf(kind: Dist | str, params, x: float) -> float:
    """Cumulative distribution function P(X <= x)."""
    kind = Dist(kind)
    dfs = _dfs(kind, params)
    if kind is Dist.STUDENT_T:
        (v,) = dfs
        if x == 0:
            return 0.5
        tail = 0.5 * betainc(v / 2.0, 0.5, v / (v + x * x))
        return 1.0 - tail if x > 0 else tail
    if x <= 0:
        return 0.0
    if kind is Dist.FISHER_F:
        d1, d2 = dfs
        return betainc(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
    (k,) = dfs
    return gammainc(k / 2.0, x / 2.0)


def dist_sf(kind: Dist | str, params, x: float) -> float:
    """Survival function P(X > x), computed without 1 - cdf cancellation."""
    kind = Dist(kind)
    dfs = _dfs(kind, params)
    if kind is Dist.STUDENT_T:
        return dist_cdf(kind, dfs, -x)
    if x <= 0:
        return 1.0
    if kind is Dist.FISHER_F:
        d1, d2 = dfs
        return betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))
    (k,) = dfs
    return gammaincc(k / 2.0, x / 2.0)
