"""Neyman-Pearson user detection for correlation-based activity detection.

The statistic for a probe user is ``Z = ||Y psi||^2``.  Conditioned on the
number ``q`` of active users on other roots it is a scaled chi-square with
``2M`` degrees of freedom:

    active:  Z ~ var_active(q) * chi2_2M,  var_active(q) = (L p + c q p + s2 L) / 2
    idle:    Z ~ var_idle(q)   * chi2_2M,  var_idle(q)   = (c q p + s2 L) / 2

with ``p`` the common received pilot power, ``s2`` the per-symbol noise
variance and ``c`` the cross-root correlation gain (1 or L).  ``q`` is
binomial over the ``K - K_r`` users outside the probe's root group.

Tail direction: a detector declaring "active" when ``Z > omega`` misses with
probability ``P(Z <= omega | active)`` (lower tail) and false-alarms with
``P(Z > omega | idle)`` (upper tail).  The threshold is the largest omega
whose miss probability stays within ``1 - P_D``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from gfdetect._backend import kernels
from gfdetect.pilot import is_prime
from gfdetect.probstat import BinomialLaw, binomial_pmf_array, binomial_tail

__all__ = [
    "ConfigError",
    "StatisticModel",
    "SystemConfig",
    "ThresholdResult",
    "build_statistic_model",
    "default_probe_group_size",
    "false_alarm_probability",
    "max_scheduling_size",
    "min_pilot_length",
    "miss_probability",
    "solve_threshold",
]

TAIL_MODELS = ("gaussian", "exact_chi_square")
CROSSCORR_MODELS = ("paper_unit", "true_zc")

# mixture components lighter than this are skipped during evaluation; the
# skipped mass is below 1e-13 for every group size handled here
_WEIGHT_CUTOFF = 1e-18
_MAX_BISECTIONS = 200


class ConfigError(ValueError):
    """Invalid configuration value; ``key`` names the offending field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class SystemConfig:
    antennas_M: int
    pilot_length_L: int
    user_count_K: int
    arrival_rate_PA: float
    target_detection_PD: float
    outage_PO: float
    pilot_snr_db: float = 15.0
    noise_per_symbol_variance: float | None = None
    tail_model: str = "gaussian"
    crosscorr_model: str = "paper_unit"
    probe_root_group_size: int | None = None

    def __post_init__(self):
        def need_int(key, lo):
            v = getattr(self, key)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < lo:
                raise ConfigError(key, f"must be an integer >= {lo}, got {v!r}")

        need_int("antennas_M", 1)
        need_int("pilot_length_L", 2)
        need_int("user_count_K", 1)
        L, K = self.pilot_length_L, self.user_count_K
        if not is_prime(L):
            raise ConfigError("pilot_length_L", "pilot_length_L must be prime")
        if K > L * L - L:
            raise ConfigError("user_count_K", f"K exceeds L²-L = {L * L - L}")
        if not 0.0 <= self.arrival_rate_PA <= 1.0:
            raise ConfigError("arrival_rate_PA", f"must lie in [0, 1], got {self.arrival_rate_PA!r}")
        for key in ("target_detection_PD", "outage_PO"):
            v = getattr(self, key)
            if not 0.0 < v < 1.0:
                raise ConfigError(key, f"must lie in (0, 1), got {v!r}")
        if not math.isfinite(self.pilot_snr_db):
            raise ConfigError("pilot_snr_db", "must be finite")
        nv = self.noise_per_symbol_variance
        if nv is not None and not (nv > 0 and math.isfinite(nv)):
            raise ConfigError("noise_per_symbol_variance", f"must be positive, got {nv!r}")
        if self.tail_model not in TAIL_MODELS:
            raise ConfigError("tail_model", f"must be one of {TAIL_MODELS}, got {self.tail_model!r}")
        if self.crosscorr_model not in CROSSCORR_MODELS:
            raise ConfigError(
                "crosscorr_model", f"must be one of {CROSSCORR_MODELS}, got {self.crosscorr_model!r}"
            )
        kr = self.probe_root_group_size
        if kr is not None:
            need_int("probe_root_group_size", 1)
            if kr > K:
                raise ConfigError("probe_root_group_size", f"{kr} exceeds K={K}")

    @property
    def noise_variance(self) -> float:
        """Per-symbol noise variance; defaults to L (despread noise CN(0, L^2))."""
        nv = self.noise_per_symbol_variance
        return float(self.pilot_length_L) if nv is None else float(nv)

    @property
    def pilot_power(self) -> float:
        return 10.0 ** (self.pilot_snr_db / 10.0) * self.noise_variance

    @property
    def crosscorr_gain(self) -> float:
        return 1.0 if self.crosscorr_model == "paper_unit" else float(self.pilot_length_L)

    @property
    def probe_group_size(self) -> int:
        if self.probe_root_group_size is not None:
            return self.probe_root_group_size
        return default_probe_group_size(self.user_count_K, self.pilot_length_L)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def default_probe_group_size(K: int, L: int) -> int:
    """Smallest root group, i.e. the probe facing the most cross-root interferers."""
    return K // -(-K // L)


@dataclass(frozen=True, eq=False)
class StatisticModel:
    half_dof: int
    q: np.ndarray
    weights: np.ndarray
    var_active: np.ndarray
    var_idle: np.ndarray
    crosscorr_gain: float
    tail_model: str
    support: np.ndarray = field(repr=False)

    @property
    def dof(self) -> int:
        return 2 * self.half_dof

    @property
    def mixture(self) -> list[tuple[int, float]]:
        return list(zip(self.q.tolist(), self.weights.tolist()))

    @property
    def exact(self) -> bool:
        return self.tail_model == "exact_chi_square"

    def cumulative_weights(self) -> np.ndarray:
        return np.cumsum(self.weights)


def build_statistic_model(config: SystemConfig, probe_root_group_size: int | None = None) -> StatisticModel:
    K = config.user_count_K
    K_r = config.probe_group_size if probe_root_group_size is None else probe_root_group_size
    if int(K_r) != K_r or not 1 <= K_r <= K:
        raise ValueError(f"probe root group size {K_r!r} must lie in [1, K={K}]")
    n = K - K_r
    q = np.arange(n + 1)
    w = binomial_pmf_array(n, config.arrival_rate_PA, q)
    L, p, c = config.pilot_length_L, config.pilot_power, config.crosscorr_gain
    noise = config.noise_variance * L
    var_idle = (c * q * p + noise) / 2.0
    var_active = (L * p + c * q * p + noise) / 2.0
    support = np.flatnonzero(w > _WEIGHT_CUTOFF)
    return StatisticModel(
        half_dof=config.antennas_M,
        q=q,
        weights=w,
        var_active=var_active,
        var_idle=var_idle,
        crosscorr_gain=c,
        tail_model=config.tail_model,
        support=support,
    )


def _check_omega(omega: float):
    if not omega >= 0:
        raise ValueError(f"threshold must be >= 0, got {omega!r}")


def miss_probability(omega: float, model: StatisticModel) -> float:
    """P(Z <= omega | probe active), mixed over the interferer count."""
    _check_omega(omega)
    s = model.support
    val = kernels.mixture_cdf(
        float(omega), model.var_active[s], model.weights[s], model.half_dof, model.exact, False
    )
    return min(1.0, max(0.0, val))


def false_alarm_probability(omega: float, model: StatisticModel) -> float:
    """P(Z > omega | probe idle), mixed over the interferer count."""
    _check_omega(omega)
    s = model.support
    val = kernels.mixture_cdf(
        float(omega), model.var_idle[s], model.weights[s], model.half_dof, model.exact, True
    )
    return min(1.0, max(0.0, val))


@dataclass(frozen=True)
class ThresholdResult:
    omega: float
    achieved_miss: float
    analytic_pfa: float
    config_echo: SystemConfig
    probe_root_group_size: int
    iterations: int


def solve_threshold(config: SystemConfig, K_r: int | None = None) -> ThresholdResult:
    """Largest omega with miss probability at most ``1 - P_D``.

    Bisection on ``[0, var_active(q_max) (2M + 20 sqrt(M))]``, carried down
    to adjacent doubles so that any relative increase of 1e-6 breaks the
    detection constraint.
    """
    K_r = config.probe_group_size if K_r is None else K_r
    model = build_statistic_model(config, K_r)
    target = 1.0 - config.target_detection_PD
    M = model.half_dof
    lo = 0.0
    hi = float(model.var_active[-1]) * (2 * M + 20 * math.sqrt(M))
    if miss_probability(lo, model) > target:
        raise ValueError(
            f"P_D={config.target_detection_PD} unattainable under the {config.tail_model} tail "
            f"with M={M}: miss probability already exceeds {target:g} at omega=0"
        )
    assert miss_probability(hi, model) > target, "threshold bracket lacks a sign change"
    it = 0
    for it in range(1, _MAX_BISECTIONS + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if miss_probability(mid, model) <= target:
            lo = mid
        else:
            hi = mid
    return ThresholdResult(
        omega=lo,
        achieved_miss=miss_probability(lo, model),
        analytic_pfa=false_alarm_probability(lo, model),
        config_echo=config,
        probe_root_group_size=K_r,
        iterations=it,
    )


def max_scheduling_size(M: int, P_A: float, P_O: float) -> int:
    """Largest K with P(Binomial(K, P_A) >= M) <= P_O.

    Outage means more simultaneously active users than a zero-forcing
    receiver with M antennas can separate (at most M - 1).  Returns 0 and
    emits a ``RuntimeWarning`` when even K = 1 is in outage.
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M!r}")
    if not 0.0 < P_A <= 1.0:
        raise ValueError(f"P_A must lie in (0, 1], got {P_A!r}")
    if not 0.0 < P_O < 1.0:
        raise ValueError(f"P_O must lie in (0, 1), got {P_O!r}")

    def ok(K: int) -> bool:
        return binomial_tail(BinomialLaw(K, P_A), M) <= P_O

    if not ok(1):
        warnings.warn(
            f"no scheduling size satisfies the outage constraint (M={M}, P_A={P_A}, P_O={P_O})",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0
    lo, hi = 1, 2
    while ok(hi):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def min_pilot_length(K_max: int) -> int:
    """Smallest prime L with L^2 - L >= K_max."""
    if int(K_max) != K_max or K_max < 1:
        raise ValueError(f"K_max must be a positive integer, got {K_max!r}")
    L = max(2, math.isqrt(K_max))
    while not (is_prime(L) and L * L - L >= K_max):
        L += 1
    return L
