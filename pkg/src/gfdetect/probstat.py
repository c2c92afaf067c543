"""Scalar probability kernels: Gaussian tails, binomial law, chi-square CDF.

Binomial probabilities use Loader's saddle-point form (Stirling remainder
plus deviance), which stays accurate to a few ulp for trial counts far
beyond the ~10^4 users this package deals with.  The chi-square CDF is the
regularized lower incomplete gamma, evaluated by the active backend
(series below ``a + 1``, Lentz continued fraction above).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from gfdetect._backend import kernels

__all__ = [
    "BinomialLaw",
    "binomial_pmf",
    "binomial_pmf_array",
    "binomial_tail",
    "chi_square_cdf",
    "chi_square_sf",
    "q_function",
    "q_inverse",
]

_STD_NORMAL = NormalDist()
_LN_2PI = math.log(2.0 * math.pi)

# stirlerr(n) = lgamma(n+1) - (n+1/2) ln n + n - ln sqrt(2 pi), n = 0..15
_STIRLERR_TABLE = np.array([
    0.0,
    0.08106146679532726,
    0.0413406959554093,
    0.02767792568499834,
    0.020790672103765093,
    0.016644691189821193,
    0.013876128823070748,
    0.01189670994589177,
    0.010411265261972096,
    0.009255462182712733,
    0.00833056343336287,
    0.007573675487951841,
    0.00694284010720953,
    0.006408994188004207,
    0.0059513701127588475,
    0.005554733551962801,
])


def q_function(x: float) -> float:
    """Upper tail of the standard normal, P(N(0,1) > x)."""
    x = float(x)
    if math.isnan(x):
        raise ValueError("q_function: x is NaN")
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_inverse(p: float) -> float:
    """Inverse of :func:`q_function` on the open interval (0, 1)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inverse: p={p!r} outside (0, 1)")
    return -_STD_NORMAL.inv_cdf(p)


@dataclass(frozen=True)
class BinomialLaw:
    trials_n: int
    success_p: float

    def __post_init__(self):
        if int(self.trials_n) != self.trials_n or self.trials_n < 0:
            raise ValueError(f"trials_n must be a non-negative integer, got {self.trials_n!r}")
        if not 0.0 <= self.success_p <= 1.0:
            raise ValueError(f"success_p must lie in [0, 1], got {self.success_p!r}")

    @property
    def mean(self) -> float:
        return self.trials_n * self.success_p

    @property
    def std(self) -> float:
        return math.sqrt(self.trials_n * self.success_p * (1.0 - self.success_p))


def _stirlerr(n: np.ndarray) -> np.ndarray:
    # n holds non-negative integers (as floats)
    out = np.empty_like(n)
    small = n <= 15
    out[small] = _STIRLERR_TABLE[n[small].astype(np.int64)]
    big = ~small
    if big.any():
        nb = n[big]
        nn = nb * nb
        s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
        val = np.where(
            nb > 500,
            (s0 - s1 / nn) / nb,
            np.where(
                nb > 80,
                (s0 - (s1 - s2 / nn) / nn) / nb,
                np.where(
                    nb > 35,
                    (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / nb,
                    (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / nb,
                ),
            ),
        )
        out[big] = val
    return out


def _bd0(x: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Deviance term x ln(x/mu) + mu - x, stable when x is close to mu."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x > 0, x * np.log(x / mu), 0.0) + mu - x
    near = np.abs(x - mu) < 0.1 * (x + mu)
    if near.any():
        xn, mn = x[near], mu[near]
        v = (xn - mn) / (xn + mn)
        s = (xn - mn) * v
        ej = 2.0 * xn * v
        v2 = v * v
        j = 1
        while True:
            ej = ej * v2
            s1 = s + ej / (2 * j + 1)
            if np.array_equal(s1, s) or j > 1000:
                break
            s = s1
            j += 1
        out[near] = s1
    return out


def binomial_pmf_array(n: int, p: float, k) -> np.ndarray:
    """Vectorized binomial PMF; entries with k outside [0, n] are 0."""
    BinomialLaw(n, p)
    k = np.atleast_1d(np.asarray(k, dtype=np.float64))
    out = np.zeros(k.shape)
    valid = (k >= 0) & (k <= n) & (k == np.floor(k))
    if not valid.any():
        return out
    q = 1.0 - p
    if p == 0.0:
        out[valid & (k == 0)] = 1.0
        return out
    if q == 0.0:
        out[valid & (k == n)] = 1.0
        return out
    if n == 0:
        out[valid] = 1.0
        return out

    x = k[valid]
    res = np.empty_like(x)
    lo = x == 0
    hi = x == n
    mid = ~(lo | hi)
    nf = float(n)
    if lo.any():
        lc = -_bd0(np.array([nf]), np.array([nf * q]))[0] - nf * p if p < 0.1 else nf * math.log(q)
        res[lo] = math.exp(lc)
    if hi.any():
        lc = -_bd0(np.array([nf]), np.array([nf * p]))[0] - nf * q if q < 0.1 else nf * math.log(p)
        res[hi] = math.exp(lc)
    if mid.any():
        xm = x[mid]
        nvec = np.full_like(xm, nf)
        lc = (
            _stirlerr(nvec)
            - _stirlerr(xm)
            - _stirlerr(nf - xm)
            - _bd0(xm, nf * p * np.ones_like(xm))
            - _bd0(nf - xm, nf * q * np.ones_like(xm))
        )
        lf = _LN_2PI + np.log(xm) + np.log1p(-xm / nf)
        res[mid] = np.exp(lc - 0.5 * lf)
    out[valid] = res
    return out


def binomial_pmf(law: BinomialLaw, k: int) -> float:
    """P(X = k) for X ~ law.  Returns 0 for k outside [0, n]."""
    return float(binomial_pmf_array(law.trials_n, law.success_p, [k])[0])


def binomial_tail(law: BinomialLaw, m: int) -> float:
    """P(X >= m) by direct summation of the PMF.

    Terms more than ~40 standard deviations (plus a constant margin) from
    the mean are below double-precision resolution of the sum and are not
    evaluated.
    """
    n, p = law.trials_n, law.success_p
    if m <= 0:
        return 1.0
    if m > n or p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    width = 40.0 * law.std + 64.0
    lo = max(m, math.floor(law.mean - width))
    hi = min(n, math.ceil(max(law.mean, m) + width))
    if lo > hi:
        return 0.0
    terms = binomial_pmf_array(n, p, np.arange(lo, hi + 1))
    return min(1.0, math.fsum(terms))


def _regularized_gamma(a: float, x: float) -> tuple[float, float]:
    return kernels.regularized_gamma(float(a), float(x))


def chi_square_cdf(dof: int, x: float) -> float:
    """P(chi2_dof <= x), i.e. the regularized lower gamma P(dof/2, x/2)."""
    if dof <= 0 or int(dof) != dof:
        raise ValueError(f"dof must be a positive integer, got {dof!r}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi_square_cdf: x={x!r} must be >= 0")
    return _regularized_gamma(0.5 * dof, 0.5 * x)[0]


def chi_square_sf(dof: int, x: float) -> float:
    """P(chi2_dof > x), computed directly rather than as ``1 - cdf``."""
    if dof <= 0 or int(dof) != dof:
        raise ValueError(f"dof must be a positive integer, got {dof!r}")
    if x < 0 or math.isnan(x):
        raise ValueError(f"chi_square_sf: x={x!r} must be >= 0")
    return _regularized_gamma(0.5 * dof, 0.5 * x)[1]
