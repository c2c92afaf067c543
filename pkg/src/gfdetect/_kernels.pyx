# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; drop-in replacement for ``gfdetect._pykernels``.

All loops run without the GIL so the Monte Carlo driver can spread trial
chunks over threads.
"""
import numpy as np

from libc.math cimport cos, erfc, exp, fabs, lgamma, log, sin, sqrt, M_PI
from libc.stdint cimport uint32_t, uint64_t
from libc.stdlib cimport free, malloc

BACKEND_NAME = "compiled"

cdef double _EPS = 2.220446049250313e-16
cdef double _FPMIN = 1e-300
cdef int _MAX_ITER = 100000
cdef double _TWO_M53 = 1.1102230246251565e-16
cdef double _SQRT1_2 = 0.7071067811865476


cdef struct Stream:
    uint32_t key0
    uint32_t key1
    uint32_t tag
    uint32_t trial_lo
    uint32_t trial_hi
    uint64_t index
    uint64_t block
    bint cached
    double buf[2]


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(10):
        if r:
            k0 = k0 + <uint32_t>0x9E3779B9
            k1 = k1 + <uint32_t>0xBB67AE85
        p0 = <uint64_t>0xD2511F53 * <uint64_t>c0
        p1 = <uint64_t>0xCD9E8D57 * <uint64_t>c2
        c0, c1, c2, c3 = (<uint32_t>(p1 >> 32)) ^ c1 ^ k0, <uint32_t>p1, (<uint32_t>(p0 >> 32)) ^ c3 ^ k1, <uint32_t>p0
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


cdef inline double _unit(uint32_t hi, uint32_t lo) noexcept nogil:
    cdef uint64_t bits = ((<uint64_t>hi << 32) | <uint64_t>lo) >> 11
    return (<double>bits + 0.5) * _TWO_M53


cdef inline void _stream_init(Stream* s, uint64_t seed, uint32_t tag, uint64_t trial, uint64_t start) noexcept nogil:
    s.key0 = <uint32_t>(seed & <uint64_t>0xFFFFFFFF)
    s.key1 = <uint32_t>(seed >> <uint64_t>32)
    s.tag = tag
    s.trial_lo = <uint32_t>(trial & <uint64_t>0xFFFFFFFF)
    s.trial_hi = <uint32_t>(trial >> <uint64_t>32)
    s.index = start
    s.cached = False


cdef inline double _next_uniform(Stream* s) noexcept nogil:
    cdef uint64_t b = s.index >> 1
    cdef uint32_t c[4]
    if not s.cached or b != s.block:
        c[0] = <uint32_t>b
        c[1] = s.tag
        c[2] = s.trial_lo
        c[3] = s.trial_hi
        _philox(c, s.key0, s.key1)
        s.buf[0] = _unit(c[0], c[1])
        s.buf[1] = _unit(c[2], c[3])
        s.block = b
        s.cached = True
    cdef double u = s.buf[s.index & 1]
    s.index += 1
    return u


cdef inline void _next_cnormal(Stream* s, double* re, double* im) noexcept nogil:
    cdef double u1 = _next_uniform(s)
    cdef double u2 = _next_uniform(s)
    cdef double r = sqrt(-log(u1))
    cdef double th = 2.0 * M_PI * u2
    re[0] = r * cos(th)
    im[0] = r * sin(th)


cdef void _reg_gamma(double a, double x, double* P, double* Q) noexcept nogil:
    cdef double lnpre, ap, term, total, b, c, d, h, an, delta
    cdef int i
    if x <= 0.0:
        P[0] = 0.0
        Q[0] = 1.0
        return
    lnpre = a * log(x) - x - lgamma(a)
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for i in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * _EPS:
                break
        P[0] = total * exp(lnpre)
        Q[0] = 1.0 - P[0]
    else:
        b = x + 1.0 - a
        c = 1.0 / _FPMIN
        d = 1.0 / b
        h = d
        for i in range(1, _MAX_ITER):
            an = -i * (i - a)
            b += 2.0
            d = an * d + b
            if fabs(d) < _FPMIN:
                d = _FPMIN
            c = b + an / c
            if fabs(c) < _FPMIN:
                c = _FPMIN
            d = 1.0 / d
            delta = d * c
            h *= delta
            if fabs(delta - 1.0) <= _EPS:
                break
        Q[0] = exp(lnpre) * h
        P[0] = 1.0 - Q[0]


def regularized_gamma(double a, double x):
    """Regularized incomplete gamma (P, Q)."""
    cdef double P, Q
    if a <= 0:
        raise ValueError("a must be positive")
    if not x >= 0:
        raise ValueError("x must be >= 0")
    with nogil:
        _reg_gamma(a, x, &P, &Q)
    return P, Q


def regularized_gamma_array(double a, x):
    cdef double[::1] xv = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i
    P = np.empty(n)
    Q = np.empty(n)
    cdef double[::1] Pv = P, Qv = Q
    if a <= 0:
        raise ValueError("a must be positive")
    for i in range(n):
        if not xv[i] >= 0:
            raise ValueError("x must be >= 0")
    with nogil:
        for i in range(n):
            _reg_gamma(a, xv[i], &Pv[i], &Qv[i])
    return P, Q


def mixture_cdf(double omega, variances, weights, long half_dof, bint exact, bint upper):
    """Neumaier-compensated sum_q w_q F(omega / var_q)."""
    cdef double[::1] var = np.ascontiguousarray(variances, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = var.shape[0], i
    cdef double a = <double>half_dof
    cdef double scale = 2.0 * sqrt(a)
    cdef double total = 0.0, comp = 0.0, term, t, z, P, Q, val
    with nogil:
        for i in range(n):
            if exact:
                _reg_gamma(a, 0.5 * omega / var[i], &P, &Q)
                val = Q if upper else P
            else:
                z = (omega / var[i] - 2.0 * a) / scale
                if upper:
                    val = 0.5 * erfc(z * _SQRT1_2)
                else:
                    val = 0.5 * erfc(-z * _SQRT1_2)
            term = w[i] * val
            t = total + term
            if fabs(total) >= fabs(term):
                comp += (total - t) + term
            else:
                comp += (term - t) + total
            total = t
    return total + comp


def uniforms(uint64_t seed, uint32_t tag, uint64_t trial, uint64_t start, Py_ssize_t n):
    cdef Stream s
    out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    _stream_init(&s, seed, tag, trial, start)
    for i in range(n):
        o[i] = _next_uniform(&s)
    return out


cdef inline Py_ssize_t _search(const double[::1] cum, double u) noexcept nogil:
    # first index with cum[i] >= u, clipped to the last entry
    cdef Py_ssize_t lo = 0, hi = cum.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] < u:
            lo = mid + 1
        else:
            hi = mid
    if lo >= cum.shape[0]:
        lo = cum.shape[0] - 1
    return lo


cdef inline double _model_draw(Stream* s, const double[::1] cum, const double[::1] var, long half_dof) noexcept nogil:
    cdef Py_ssize_t j = _search(cum, _next_uniform(s))
    cdef double acc = 0.0
    cdef long i
    for i in range(half_dof):
        acc -= log(_next_uniform(s))
    return var[j] * 2.0 * acc


def model_faithful_draws(cum_weights, variances, long half_dof, uint64_t seed, uint32_t tag,
                         uint64_t first_trial, Py_ssize_t n_trials):
    cdef const double[::1] cum = np.ascontiguousarray(cum_weights, dtype=np.float64)
    cdef const double[::1] var = np.ascontiguousarray(variances, dtype=np.float64)
    out = np.empty(n_trials)
    cdef double[::1] o = out
    cdef Stream s
    cdef Py_ssize_t t
    with nogil:
        for t in range(n_trials):
            _stream_init(&s, seed, tag, first_trial + t, 0)
            o[t] = _model_draw(&s, cum, var, half_dof)
    return out


def model_faithful_count(cum_weights, variances, long half_dof, double omega, uint64_t seed,
                         uint32_t tag, uint64_t first_trial, Py_ssize_t n_trials):
    cdef const double[::1] cum = np.ascontiguousarray(cum_weights, dtype=np.float64)
    cdef const double[::1] var = np.ascontiguousarray(variances, dtype=np.float64)
    cdef Stream s
    cdef Py_ssize_t t
    cdef long count = 0
    with nogil:
        for t in range(n_trials):
            _stream_init(&s, seed, tag, first_trial + t, 0)
            if _model_draw(&s, cum, var, half_dof) > omega:
                count += 1
    return int(count)


cdef double _waveform_draw(Stream* s, double active_prob, Py_ssize_t probe, bint force_active,
                           const double[::1] g_re, const double[::1] g_im, double sqrt_pbar,
                           double noise_std, Py_ssize_t M, const double[::1] psi_re,
                           const double[::1] psi_im, char* active, double* y_re,
                           double* y_im) noexcept nogil:
    cdef Py_ssize_t K = g_re.shape[0], L = psi_re.shape[0], j, m, l
    cdef double hr, hi, gr, gi, vr, vi, z = 0.0
    for j in range(K):
        active[j] = _next_uniform(s) < active_prob
    active[probe] = force_active
    for m in range(M):
        y_re[m] = 0.0
        y_im[m] = 0.0
    for j in range(K):
        if active[j]:
            gr = sqrt_pbar * g_re[j]
            gi = sqrt_pbar * g_im[j]
            for m in range(M):
                _next_cnormal(s, &hr, &hi)
                y_re[m] += hr * gr - hi * gi
                y_im[m] += hr * gi + hi * gr
    for m in range(M):
        for l in range(L):
            _next_cnormal(s, &vr, &vi)
            vr *= noise_std
            vi *= noise_std
            y_re[m] += vr * psi_re[l] - vi * psi_im[l]
            y_im[m] += vr * psi_im[l] + vi * psi_re[l]
    for m in range(M):
        z += y_re[m] * y_re[m] + y_im[m] * y_im[m]
    return z


def _waveform(double active_prob, Py_ssize_t probe, bint force_active, gains, double sqrt_pbar,
              double noise_std, Py_ssize_t n_antennas, psi_probe, double omega, uint64_t seed,
              uint32_t tag, uint64_t first_trial, Py_ssize_t n_trials, bint count_only):
    gains = np.asarray(gains, dtype=np.complex128)
    psi_probe = np.asarray(psi_probe, dtype=np.complex128)
    cdef const double[::1] g_re = np.ascontiguousarray(gains.real)
    cdef const double[::1] g_im = np.ascontiguousarray(gains.imag)
    cdef const double[::1] p_re = np.ascontiguousarray(psi_probe.real)
    cdef const double[::1] p_im = np.ascontiguousarray(psi_probe.imag)
    cdef Py_ssize_t K = g_re.shape[0], t
    if not 0 <= probe < K:
        raise ValueError("probe index out of range")
    out = np.empty(0 if count_only else n_trials)
    cdef double[::1] o = out
    cdef char* active = <char*>malloc(K)
    cdef double* y_re = <double*>malloc(n_antennas * sizeof(double))
    cdef double* y_im = <double*>malloc(n_antennas * sizeof(double))
    cdef Stream s
    cdef long count = 0
    cdef double z
    if active == NULL or y_re == NULL or y_im == NULL:
        free(active)
        free(y_re)
        free(y_im)
        raise MemoryError()
    try:
        with nogil:
            for t in range(n_trials):
                _stream_init(&s, seed, tag, first_trial + t, 0)
                z = _waveform_draw(&s, active_prob, probe, force_active, g_re, g_im, sqrt_pbar,
                                   noise_std, n_antennas, p_re, p_im, active, y_re, y_im)
                if count_only:
                    if z > omega:
                        count += 1
                else:
                    o[t] = z
    finally:
        free(active)
        free(y_re)
        free(y_im)
    return int(count) if count_only else out


def waveform_draws(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                   n_antennas, psi_probe, seed, tag, first_trial, n_trials):
    return _waveform(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                     n_antennas, psi_probe, 0.0, seed, tag, first_trial, n_trials, False)


def waveform_count(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                   n_antennas, psi_probe, omega, seed, tag, first_trial, n_trials):
    return _waveform(active_prob, probe, force_active, gains, sqrt_pbar, noise_std,
                     n_antennas, psi_probe, omega, seed, tag, first_trial, n_trials, True)
