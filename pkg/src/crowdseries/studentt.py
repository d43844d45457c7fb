"""Student-t quantiles via the regularized incomplete beta function.

The outlier test needs upper-tail t quantiles for its critical-value
chain. These are obtained by inverting the regularized incomplete beta
function I_x(a, b) with Newton steps (bisection-safeguarded), using the
standard relation between the t CDF and I_x(df/2, 1/2).
"""

from __future__ import annotations

import math


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-15:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b) for a, b > 0, x in [0, 1]."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def betainc_inv(a: float, b: float, p: float) -> float:
    """Solve I_x(a, b) = p for x by bisection-safeguarded Newton."""
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    if p > 0.5:
        # solve in the small-tail orientation for full relative precision
        return 1.0 - betainc_inv(b, a, 1.0 - p)
    lo, hi = 0.0, 1.0
    x = 0.5
    ln_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    for _ in range(200):
        f = betainc_regularized(a, b, x) - p
        if f > 0:
            hi = x
        else:
            lo = x
        if abs(f) <= 1e-14 * p:
            break
        # derivative: x^(a-1) (1-x)^(b-1) / B(a, b); bisect when it underflows
        ln_pdf = (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - ln_beta
        pdf = math.exp(ln_pdf) if ln_pdf > -700.0 else 0.0
        x_new = x - f / pdf if pdf > 0 else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-16 * abs(x_new):
            x = x_new
            break
        x = x_new
    return x


def t_cdf(t: float, df: float) -> float:
    """Student-t cumulative distribution function."""
    if df <= 0:
        raise ValueError("df must be positive")
    if t == 0.0:
        return 0.5
    z = df / (df + t * t)
    tail = 0.5 * betainc_regularized(df / 2.0, 0.5, z)
    return 1.0 - tail if t > 0 else tail


def t_ppf(p: float, df: float) -> float:
    """Student-t quantile function (inverse CDF)."""
    if df <= 0:
        raise ValueError("df must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if p == 0.5:
        return 0.0
    tail = 2.0 * min(p, 1.0 - p)
    z = betainc_inv(df / 2.0, 0.5, tail)
    t = math.sqrt(df * (1.0 - z) / z) if z > 0 else math.inf
    # one Newton polish on the CDF removes the inversion residue
    if math.isfinite(t):
        q = 1.0 - tail / 2.0
        pdf = math.exp(
            math.lgamma((df + 1.0) / 2.0)
            - math.lgamma(df / 2.0)
            - 0.5 * math.log(df * math.pi)
            - (df + 1.0) / 2.0 * math.log1p(t * t / df)
        )
        if pdf > 0:
            t -= (t_cdf(t, df) - q) / pdf
    return t if p > 0.5 else -t
