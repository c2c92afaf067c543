"""Pure numpy implementations of the hot kernels.

Signatures and random-stream consumption match ``_kernels.pyx`` exactly;
only floating-point summation order differs.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from gfdetect.rng import complex_normal_from_uniforms, uniform_block

BACKEND_NAME = "python"

_EPS = np.finfo(float).eps
_FPMIN = 1e-300
_MAX_ITER = 100_000
_CHUNK = 4096


def regularized_gamma_array(a: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Regularized incomplete gamma (P, Q) for scalar ``a`` and array ``x``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if a <= 0:
        raise ValueError("a must be positive")
    if (x < 0).any() or np.isnan(x).any():
        raise ValueError("x must be >= 0")
    P = np.zeros_like(x)
    Q = np.ones_like(x)
    pos = x > 0
    with np.errstate(divide="ignore"):
        lnpre = a * np.log(x) - x - math.lgamma(a)

    ser = pos & (x < a + 1.0)
    if ser.any():
        xs = x[ser]
        ap = a
        term = np.full_like(xs, 1.0 / a)
        total = term.copy()
        for _ in range(_MAX_ITER):
            ap += 1.0
            term = term * (xs / ap)
            total = total + term
            if (np.abs(term) < np.abs(total) * _EPS).all():
                break
        p = total * np.exp(lnpre[ser])
        P[ser] = p
        Q[ser] = 1.0 - p

    cf = pos & ~ser
    if cf.any():
        xc = x[cf]
        b = xc + 1.0 - a
        c = np.full_like(xc, 1.0 / _FPMIN)
        d = 1.0 / b
        h = d.copy()
        for i in range(1, _MAX_ITER):
            an = -i * (i - a)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
            c = b + an / c
            c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
            d = 1.0 / d
            delta = d * c
            h = h * delta
            if (np.abs(delta - 1.0) <= _EPS).all():
                break
        q = np.exp(lnpre[cf]) * h
        Q[cf] = q
        P[cf] = 1.0 - q
    return P, Q


def regularized_gamma(a: float, x: float) -> tuple[float, float]:
    P, Q = regularized_gamma_array(a, [x])
    return float(P[0]), float(Q[0])


def mixture_cdf(omega, variances, weights, half_dof, exact, upper):
    """sum_q w_q F(omega / var_q) for the 2*half_dof chi-square statistic.

    ``exact`` selects the chi-square law over its Gaussian approximation;
    ``upper`` returns the upper tail instead of the CDF.
    """
    variances = np.asarray(variances, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    ratio = omega / variances
    if exact:
        P, Q = regularized_gamma_array(half_dof, 0.5 * ratio)
        vals = Q if upper else P
    else:
        z = (ratio - 2.0 * half_dof) / (2.0 * math.sqrt(half_dof))
        vals = ndtr(-z) if upper else ndtr(z)
    return math.fsum(weights * vals)


def uniforms(seed, tag, trial, start, n):
    return uniform_block(seed, tag, [trial], start, n)[0]


def model_faithful_draws(cum_weights, variances, half_dof, seed, tag, first_trial, n_trials):
    cum_weights = np.asarray(cum_weights, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    out = np.empty(n_trials)
    last = len(cum_weights) - 1
    for lo in range(0, n_trials, _CHUNK):
        hi = min(n_trials, lo + _CHUNK)
        trials = np.arange(first_trial + lo, first_trial + hi, dtype=np.uint64)
        u = uniform_block(seed, tag, trials, 0, 1 + half_dof)
        j = np.minimum(np.searchsorted(cum_weights, u[:, 0], side="left"), last)
        out[lo:hi] = variances[j] * (-2.0 * np.log(u[:, 1:]).sum(axis=1))
    return out


def model_faithful_count(cum_weights, variances, half_dof, omega, seed, tag, first_trial, n_trials):
    z = model_faithful_draws(cum_weights, variances, half_dof, seed, tag, first_trial, n_trials)
    return int(np.count_nonzero(z > omega))


def waveform_draws(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                   n_antennas, psi_probe, seed, tag, first_trial, n_trials):
    gains = np.asarray(gains, dtype=np.complex128)
    psi_probe = np.asarray(psi_probe, dtype=np.complex128)
    n_users = gains.shape[0]
    n_pilot = psi_probe.shape[0]
    M = n_antennas
    out = np.empty(n_trials)
    for t in range(n_trials):
        trial = first_trial + t
        u = uniform_block(seed, tag, [trial], 0, n_users)[0]
        active = u < active_prob
        active[probe] = bool(force_active)
        idx = np.flatnonzero(active)
        pos = n_users
        n_h = 2 * M * idx.size
        h = complex_normal_from_uniforms(
            uniform_block(seed, tag, [trial], pos, n_h)[0]).reshape(idx.size, M)
        pos += n_h
        y = sqrt_pbar * (gains[idx] @ h) if idx.size else np.zeros(M, dtype=np.complex128)
        v = noise_std * complex_normal_from_uniforms(
            uniform_block(seed, tag, [trial], pos, 2 * M * n_pilot)[0]).reshape(M, n_pilot)
        y = y + v @ psi_probe
        out[t] = float(np.vdot(y, y).real)
    return out


def waveform_count(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                   n_antennas, psi_probe, omega, seed, tag, first_trial, n_trials):
    z = waveform_draws(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                       n_antennas, psi_probe, seed, tag, first_trial, n_trials)
    return int(np.count_nonzero(z > omega))
