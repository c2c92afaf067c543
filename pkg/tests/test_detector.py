import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gfdetect.detector import (
    ConfigError,
    SystemConfig,
    build_statistic_model,
    default_probe_group_size,
    false_alarm_probability,
    max_scheduling_size,
    min_pilot_length,
    miss_probability,
    solve_threshold,
)
from gfdetect.pilot import is_prime

SNR_2X = 10 * math.log10(2.0)


def cfg(**kw):
    base = dict(antennas_M=64, pilot_length_L=5, user_count_K=12, arrival_rate_PA=0.3,
                target_detection_PD=0.99, outage_PO=0.1)
    base.update(kw)
    return SystemConfig(**base)


def oracle_mixture(omega, config, K_r, active, upper):
    """Direct scipy evaluation of the interferer-count mixture."""
    n = config.user_count_K - K_r
    L, M = config.pilot_length_L, config.antennas_M
    p, s2 = config.pilot_power, config.noise_variance
    c = 1.0 if config.crosscorr_model == "paper_unit" else L
    total = 0.0
    for q in range(n + 1):
        w = stats.binom.pmf(q, n, config.arrival_rate_PA)
        var = ((L * p if active else 0.0) + c * q * p + s2 * L) / 2
        if config.tail_model == "exact_chi_square":
            f = stats.chi2.sf if upper else stats.chi2.cdf
            total += w * f(omega / var, 2 * M)
        else:
            z = (omega / var - 2 * M) / (2 * math.sqrt(M))
            total += w * (stats.norm.sf(z) if upper else stats.norm.cdf(z))
    return total


def test_variance_examples():
    c = cfg(pilot_length_L=5, user_count_K=8, pilot_snr_db=SNR_2X, noise_per_symbol_variance=5.0)
    assert c.pilot_power == pytest.approx(10.0)
    m = build_statistic_model(c, 4)
    assert m.var_active[3] == pytest.approx(52.5)
    assert m.var_idle[3] == pytest.approx(27.5)
    mz = build_statistic_model(cfg(pilot_length_L=5, user_count_K=8, pilot_snr_db=SNR_2X,
                                   noise_per_symbol_variance=5.0, crosscorr_model="true_zc"), 4)
    assert mz.var_idle[3] == pytest.approx(87.5)


def test_model_shape_and_weights():
    c = cfg(user_count_K=12, arrival_rate_PA=0.3)
    m = build_statistic_model(c)
    assert c.probe_group_size == default_probe_group_size(12, 5) == 4
    assert m.dof == 128 and m.half_dof == 64
    assert list(m.q) == list(range(9))
    np.testing.assert_allclose(m.weights, stats.binom.pmf(np.arange(9), 8, 0.3), rtol=1e-13)
    assert m.cumulative_weights()[-1] == pytest.approx(1.0)
    assert m.mixture[0][0] == 0


def test_default_noise_and_power():
    c = cfg(pilot_length_L=7, user_count_K=3, pilot_snr_db=15.0)
    assert c.noise_variance == 7.0
    assert c.pilot_power == pytest.approx(7 * 10**1.5)
    assert c.crosscorr_gain == 1.0
    assert cfg(crosscorr_model="true_zc").crosscorr_gain == 5.0


@pytest.mark.parametrize("kw,key", [
    (dict(pilot_length_L=6), "pilot_length_L"),
    (dict(user_count_K=21), "user_count_K"),
    (dict(user_count_K=0), "user_count_K"),
    (dict(antennas_M=0), "antennas_M"),
    (dict(antennas_M=True), "antennas_M"),
    (dict(arrival_rate_PA=1.2), "arrival_rate_PA"),
    (dict(target_detection_PD=1.0), "target_detection_PD"),
    (dict(outage_PO=0.0), "outage_PO"),
    (dict(pilot_snr_db=float("inf")), "pilot_snr_db"),
    (dict(noise_per_symbol_variance=0.0), "noise_per_symbol_variance"),
    (dict(tail_model="poisson"), "tail_model"),
    (dict(crosscorr_model="x"), "crosscorr_model"),
    (dict(probe_root_group_size=13), "probe_root_group_size"),
])
def test_config_validation(kw, key):
    with pytest.raises(ConfigError) as err:
        cfg(**kw)
    assert err.value.key == key
    assert str(err.value).startswith(key)


def test_config_messages():
    with pytest.raises(ConfigError, match="pilot_length_L must be prime"):
        cfg(pilot_length_L=9)
    with pytest.raises(ConfigError, match="L²-L = 20"):
        cfg(user_count_K=21)


def test_config_roundtrip_dict():
    c = cfg(tail_model="exact_chi_square")
    assert SystemConfig(**c.to_dict()) == c
    assert "crosscorr_model" in SystemConfig.field_names()


@pytest.mark.parametrize("tail", ["gaussian", "exact_chi_square"])
@pytest.mark.parametrize("xcorr", ["paper_unit", "true_zc"])
def test_mixture_matches_oracle(backend, tail, xcorr):
    c = cfg(tail_model=tail, crosscorr_model=xcorr, user_count_K=17, arrival_rate_PA=0.4)
    m = build_statistic_model(c)
    scale = float(m.var_idle[0]) * 2 * c.antennas_M
    for omega in np.linspace(0, 4 * scale, 9):
        assert miss_probability(omega, m) == pytest.approx(
            oracle_mixture(omega, c, c.probe_group_size, True, False), rel=1e-9, abs=1e-14)
        assert false_alarm_probability(omega, m) == pytest.approx(
            oracle_mixture(omega, c, c.probe_group_size, False, True), rel=1e-9, abs=1e-14)


def test_negative_threshold_rejected():
    m = build_statistic_model(cfg())
    with pytest.raises(ValueError):
        miss_probability(-1.0, m)
    with pytest.raises(ValueError):
        false_alarm_probability(float("nan"), m)


@pytest.mark.parametrize("M", [16, 100, 512])
@pytest.mark.parametrize("pd", [0.5, 0.9, 0.999])
def test_gaussian_closed_form(M, pd):
    c = cfg(antennas_M=M, arrival_rate_PA=0.0, target_detection_PD=pd)
    sigma2 = build_statistic_model(c).var_active[0]
    expect = sigma2 * (2 * M + 2 * math.sqrt(M) * stats.norm.ppf(1 - pd))
    assert solve_threshold(c).omega == pytest.approx(expect, rel=1e-9)


@pytest.mark.parametrize("M", [16, 128])
@pytest.mark.parametrize("pd", [0.5, 0.99])
def test_exact_closed_form(M, pd):
    c = cfg(antennas_M=M, arrival_rate_PA=0.0, target_detection_PD=pd, tail_model="exact_chi_square")
    m = build_statistic_model(c)
    res = solve_threshold(c)
    expect = m.var_active[0] * stats.chi2.ppf(1 - pd, 2 * M)
    assert res.omega == pytest.approx(expect, rel=1e-9)
    assert res.analytic_pfa == pytest.approx(stats.chi2.sf(res.omega / m.var_idle[0], 2 * M), rel=1e-9)


def test_pd_half_gives_mean():
    c = cfg(antennas_M=100, arrival_rate_PA=0.0, target_detection_PD=0.5)
    sigma2 = build_statistic_model(c).var_active[0]
    assert solve_threshold(c).omega == pytest.approx(2 * 100 * sigma2, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    M=st.integers(8, 256), L=st.sampled_from([3, 5, 7, 11, 13]), frac=st.floats(0, 1),
    pa=st.floats(0, 1), pd=st.floats(0.05, 0.999),
    tail=st.sampled_from(["gaussian", "exact_chi_square"]),
)
def test_solver_is_maximal(M, L, frac, pa, pd, tail):
    K = 1 + int(frac * (L * L - L - 1))
    c = cfg(antennas_M=M, pilot_length_L=L, user_count_K=K, arrival_rate_PA=pa,
            target_detection_PD=pd, tail_model=tail)
    res = solve_threshold(c)
    m = build_statistic_model(c)
    assert res.achieved_miss <= 1 - pd
    assert abs(res.achieved_miss - (1 - pd)) <= 1e-9
    assert miss_probability(res.omega * (1 + 1e-6), m) > 1 - pd
    assert res.probe_root_group_size == c.probe_group_size
    assert res.config_echo == c


def test_roc_monotone():
    pfas = [solve_threshold(cfg(target_detection_PD=pd)).analytic_pfa
            for pd in (0.5, 0.8, 0.9, 0.99, 0.999)]
    assert all(a <= b for a, b in zip(pfas, pfas[1:]))


def test_larger_group_is_easier():
    c = cfg(user_count_K=20, arrival_rate_PA=0.5)
    pfa = [solve_threshold(c, K_r).analytic_pfa for K_r in (1, 4, 8)]
    assert pfa[0] >= pfa[1] >= pfa[2]


def test_unattainable_gaussian_target():
    with pytest.raises(ValueError, match="unattainable"):
        solve_threshold(cfg(antennas_M=1, target_detection_PD=0.99))


def test_kmax_reference_value():
    assert max_scheduling_size(512, 0.1, 0.1) == 4846


def kmax_oracle(M, pa, po, limit):
    best = 0
    for K in range(1, limit):
        if stats.binom.sf(M - 1, K, pa) <= po:
            best = K
    return best


@pytest.mark.parametrize("M,pa,po", [(4, 0.3, 0.1), (16, 0.1, 0.05), (32, 0.5, 0.2), (64, 0.25, 0.01)])
def test_kmax_against_scan(M, pa, po):
    limit = int(4 * M / pa) + 50
    assert max_scheduling_size(M, pa, po) == kmax_oracle(M, pa, po, limit)


def test_kmax_unsatisfiable_warns():
    with pytest.warns(RuntimeWarning):
        assert max_scheduling_size(1, 0.5, 0.25) == 0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert max_scheduling_size(2, 1.0, 0.1) == 1


def test_kmax_monotone_grid():
    Ms = [8, 16, 32, 64, 128]
    for pa in (0.05, 0.2, 0.6):
        ks = [max_scheduling_size(M, pa, 0.1) for M in Ms]
        assert ks == sorted(ks)
    for M in (16, 64):
        ks = [max_scheduling_size(M, pa, 0.1) for pa in (0.05, 0.1, 0.3, 0.9)]
        assert ks == sorted(ks, reverse=True)


@pytest.mark.parametrize("args", [(0, 0.1, 0.1), (4, 0.0, 0.1), (4, 0.1, 1.0), (2.5, 0.1, 0.1)])
def test_kmax_domain(args):
    with pytest.raises(ValueError):
        max_scheduling_size(*args)


@pytest.mark.parametrize("K", [1, 2, 3, 7, 42, 43, 500, 4846, 9312, 9313])
def test_min_pilot_length_scan(K):
    L = next(n for n in range(2, 1000) if is_prime(n) and n * n - n >= K)
    assert min_pilot_length(K) == L


def test_min_pilot_length_known():
    assert (min_pilot_length(4846), min_pilot_length(42), min_pilot_length(2)) == (71, 7, 2)
    with pytest.raises(ValueError):
        min_pilot_length(0)
