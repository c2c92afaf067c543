"""Empirical detection / false-alarm estimates.

Two modes:

* ``model_faithful`` draws the statistic straight from the conditional
  chi-square mixture (binomial interferer count, then ``var * chi2_2M``).
* ``waveform`` synthesizes the received pilot block from Rayleigh channels,
  real Zadoff-Chu pilots and white complex Gaussian noise, then correlates.

P_D and P_FA come from separate trial streams (probe forced active / idle).
Trial ``t`` always uses the counter-based stream ``(seed, t)``, so reports
do not depend on the worker count.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from gfdetect._backend import kernels
from gfdetect.detector import StatisticModel, SystemConfig, build_statistic_model
from gfdetect.pilot import PilotAssignment, assign_pilots, pilot_matrix
from gfdetect.probstat import q_inverse
from gfdetect.rng import RNG_ALGORITHM, TAG_MODEL, TAG_WAVEFORM, TrialStream

__all__ = [
    "MODES",
    "TrialPlan",
    "TrialReport",
    "default_probe_user",
    "draw_statistic_model_faithful",
    "run_trials",
    "sufficient_statistics",
    "synthesize_received_pilot",
    "wilson_interval",
]

MODES = ("model_faithful", "waveform")
CHUNK_TRIALS = 8192
_Z95 = q_inverse(0.025)


def wilson_interval(successes: int, n: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4 * n * n)) / denom
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


def default_probe_user(K: int, L: int) -> int:
    """1-based user on the last root, whose group is the smallest."""
    return -(-K // L)


def draw_statistic_model_faithful(stream: TrialStream, model: StatisticModel, active: bool) -> float:
    """One draw of Z: pick q by inverse CDF, then ``var(q) * (-2 sum log U)``."""
    u = stream.uniforms(1 + model.half_dof)
    cum = model.cumulative_weights()
    j = min(int(np.searchsorted(cum, u[0], side="left")), len(cum) - 1)
    var = model.var_active[j] if active else model.var_idle[j]
    return float(var * (-2.0 * np.log(u[1:]).sum()))


def synthesize_received_pilot(stream: TrialStream, config: SystemConfig, assignment: PilotAssignment,
                              activations, noise_variance: float | None = None) -> np.ndarray:
    """Received M x L pilot block for the given activation pattern.

    Channels are drawn (M complex normals each) for active users in index
    order, then the noise block row by row, matching the compiled kernel.
    """
    activations = np.asarray(activations, dtype=bool)
    K, L, M = config.user_count_K, config.pilot_length_L, config.antennas_M
    if activations.shape != (K,):
        raise ValueError(f"activations must have shape ({K},), got {activations.shape}")
    if assignment.user_count_K != K or assignment.length_L != L:
        raise ValueError("assignment does not match the configuration")
    nv = config.noise_variance if noise_variance is None else noise_variance
    idx = np.flatnonzero(activations)
    h = stream.complex_normals(M * idx.size).reshape(idx.size, M)
    psi = pilot_matrix(assignment)[:, idx] if idx.size else np.zeros((L, 0), complex)
    y = math.sqrt(config.pilot_power) * (h.T @ psi.conj().T)
    v = math.sqrt(nv) * stream.complex_normals(M * L).reshape(M, L)
    return y + v


def sufficient_statistics(received: np.ndarray, assignment: PilotAssignment) -> np.ndarray:
    """``Z_j = ||Y psi_j||^2`` for every assigned user."""
    received = np.asarray(received)
    if received.ndim != 2 or received.shape[1] != assignment.length_L:
        raise ValueError(
            f"received block must be M x {assignment.length_L}, got {received.shape}"
        )
    proj = received @ pilot_matrix(assignment)
    return (proj.real**2 + proj.imag**2).sum(axis=0)


@dataclass(frozen=True)
class TrialPlan:
    config: SystemConfig
    mode: str = "model_faithful"
    trials: int = 100_000
    seed: int = 0
    probe_user_index: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        j = self.probe_user_index
        if j is not None and not 1 <= j <= self.config.user_count_K:
            raise ValueError(f"probe user {j} outside [1, {self.config.user_count_K}]")

    @property
    def pd_trials(self) -> int:
        return (self.trials + 1) // 2

    @property
    def pfa_trials(self) -> int:
        return self.trials // 2

    def probe_user(self) -> int:
        if self.probe_user_index is not None:
            return self.probe_user_index
        cfg = self.config
        if cfg.probe_root_group_size is None:
            return default_probe_user(cfg.user_count_K, cfg.pilot_length_L)
        assignment = assign_pilots(cfg.user_count_K, cfg.pilot_length_L)
        for j in range(1, cfg.user_count_K + 1):
            if assignment.group_size_of(j) == cfg.probe_root_group_size:
                return j
        raise ValueError(f"no user has root group size {cfg.probe_root_group_size}")


@dataclass(frozen=True)
class TrialReport:
    empirical_pd: float
    empirical_pfa: float
    pd_trials: int
    pfa_trials: int
    pd_detections: int
    pfa_detections: int
    wilson_ci_pd: tuple[float, float]
    wilson_ci_pfa: tuple[float, float]
    seed_echo: int
    mode_echo: str
    probe_user: int
    probe_root_group_size: int
    omega: float
    rng_algorithm: str = RNG_ALGORITHM

    @property
    def trials(self) -> int:
        return self.pd_trials + self.pfa_trials


def _chunks(first: int, n: int):
    return [(first + lo, min(n, lo + CHUNK_TRIALS) - lo) for lo in range(0, n, CHUNK_TRIALS)]


def _count(fn, first: int, n: int, workers: int) -> int:
    parts = _chunks(first, n)
    if workers <= 1 or len(parts) <= 1:
        return sum(fn(a, b) for a, b in parts)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(lambda ab: fn(*ab), parts))


def _rate(k: int, n: int) -> float:
    return k / n if n else float("nan")


def run_trials(plan: TrialPlan, omega: float, workers: int | None = None) -> TrialReport:
    """Estimate P_D (probe forced active) and P_FA (probe forced idle) at ``omega``.

    P_D trials use stream indices ``0 .. pd_trials-1``; P_FA trials follow.
    """
    if not omega >= 0:
        raise ValueError(f"threshold must be >= 0, got {omega!r}")
    workers = (os.cpu_count() or 1) if workers is None else max(1, int(workers))
    cfg = plan.config
    K, L, M = cfg.user_count_K, cfg.pilot_length_L, cfg.antennas_M
    assignment = assign_pilots(K, L)
    probe = plan.probe_user()
    K_r = assignment.group_size_of(probe)
    omega = float(omega)
    seed = plan.seed

    if plan.mode == "model_faithful":
        model = build_statistic_model(cfg, K_r)
        cum = model.cumulative_weights()

        def counter(var):
            return lambda first, n: kernels.model_faithful_count(
                cum, var, M, omega, seed, TAG_MODEL, first, n)

        count_active = counter(model.var_active)
        count_idle = counter(model.var_idle)
    else:
        psi = pilot_matrix(assignment)
        psi_probe = psi[:, probe - 1]
        gains = psi.conj().T @ psi_probe
        sqrt_p = math.sqrt(cfg.pilot_power)
        noise_std = math.sqrt(cfg.noise_variance)
        pa = cfg.arrival_rate_PA

        def counter(force):
            return lambda first, n: kernels.waveform_count(
                pa, probe - 1, force, gains, sqrt_p, noise_std, M, psi_probe, omega,
                seed, TAG_WAVEFORM, first, n)

        count_active = counter(True)
        count_idle = counter(False)

    n_pd, n_pfa = plan.pd_trials, plan.pfa_trials
    det_pd = _count(count_active, 0, n_pd, workers)
    det_pfa = _count(count_idle, n_pd, n_pfa, workers)
    return TrialReport(
        empirical_pd=_rate(det_pd, n_pd),
        empirical_pfa=_rate(det_pfa, n_pfa),
        pd_trials=n_pd,
        pfa_trials=n_pfa,
        pd_detections=det_pd,
        pfa_detections=det_pfa,
        wilson_ci_pd=wilson_interval(det_pd, n_pd),
        wilson_ci_pfa=wilson_interval(det_pfa, n_pfa),
        seed_echo=seed,
        mode_echo=plan.mode,
        probe_user=probe,
        probe_root_group_size=K_r,
        omega=omega,
    )
