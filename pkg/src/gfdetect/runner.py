"""Parameter sweeps, JSON configuration files and CSV output."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from gfdetect.detector import (
    ConfigError,
    SystemConfig,
    max_scheduling_size,
    solve_threshold,
)
from gfdetect.montecarlo import MODES, TrialPlan, run_trials

__all__ = [
    "FIG2_PRESET",
    "FIG3_PRESET",
    "SWEEP_COLUMNS",
    "OutputError",
    "SweepRow",
    "SweepSpec",
    "emit_csv",
    "format_value",
    "load_config",
    "preset",
    "run_sweep",
]

AXES = ("antennas_M", "arrival_rate_PA")
SWEEP_KEYS = ("axis", "grid", "pd_targets", "couple_kmax", "mc_trials", "seed", "mc_mode")

# Recorded only; the pilot length is an independent input.
FRAME_METADATA = {"subframe_ms": 1.0, "subband_khz": 125.0, "block_symbols_N": 100}

SWEEP_COLUMNS = (
    "M", "L", "K", "P_A", "P_D", "P_O", "snr_db", "noise_var", "tail", "xcorr", "K_r",
    "kmax", "omega", "miss_analytic", "pfa_analytic",
    "mode", "trials", "seed",
    "pd_mc", "pd_ci_low", "pd_ci_high", "pfa_mc", "pfa_ci_low", "pfa_ci_high",
    "status",
)


class OutputError(OSError):
    pass


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple
    fixed: SystemConfig
    pd_targets: tuple[float, ...]
    couple_kmax: bool = True
    mc_trials: int = 0
    seed: int = 0
    mc_mode: str = "model_faithful"

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError("axis", f"must be one of {AXES}, got {self.axis!r}")
        if not self.grid:
            raise ConfigError("grid", "must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid", "must be strictly increasing")
        if not self.pd_targets or any(not 0.0 < p < 1.0 for p in self.pd_targets):
            raise ConfigError("pd_targets", "values must lie in (0, 1)")
        if int(self.mc_trials) != self.mc_trials or self.mc_trials < 0:
            raise ConfigError("mc_trials", "must be a non-negative integer")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if self.mc_mode not in MODES:
            raise ConfigError("mc_mode", f"must be one of {MODES}")


@dataclass(frozen=True)
class SweepRow:
    config: SystemConfig
    kmax: int | None
    K_r: int | None = None
    omega: float | None = None
    miss_analytic: float | None = None
    pfa_analytic: float | None = None
    mode: str | None = None
    trials: int | None = None
    seed: int | None = None
    mc: dict = field(default_factory=dict)
    status: str = "ok"

    def record(self) -> dict:
        c = self.config
        rec = {
            "M": c.antennas_M, "L": c.pilot_length_L, "K": c.user_count_K,
            "P_A": c.arrival_rate_PA, "P_D": c.target_detection_PD, "P_O": c.outage_PO,
            "snr_db": c.pilot_snr_db, "noise_var": c.noise_variance,
            "tail": c.tail_model, "xcorr": c.crosscorr_model, "K_r": self.K_r,
            "kmax": self.kmax, "omega": self.omega,
            "miss_analytic": self.miss_analytic, "pfa_analytic": self.pfa_analytic,
            "mode": self.mode, "trials": self.trials, "seed": self.seed,
            "status": self.status,
        }
        for key in ("pd_mc", "pd_ci_low", "pd_ci_high", "pfa_mc", "pfa_ci_low", "pfa_ci_high"):
            rec[key] = self.mc.get(key)
        return {k: format_value(rec[k]) for k in SWEEP_COLUMNS}


def _point_rows(spec: SweepSpec, value, workers: int) -> list[SweepRow]:
    base = replace(spec.fixed, **{spec.axis: value})
    L = base.pilot_length_L
    kmax = None
    status = "ok"
    if spec.couple_kmax:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            kmax = max_scheduling_size(base.antennas_M, base.arrival_rate_PA, base.outage_PO)
        if kmax == 0:
            return [SweepRow(replace(base, target_detection_PD=pd), 0, status="kmax_zero")
                    for pd in spec.pd_targets]
        K = kmax
        if K > L * L - L:
            K, status = L * L - L, "kmax_capped"
        base = replace(base, user_count_K=K)
    rows = []
    for pd in spec.pd_targets:
        cfg = replace(base, target_detection_PD=pd)
        try:
            res = solve_threshold(cfg)
        except ValueError as exc:
            rows.append(SweepRow(cfg, kmax, status=f"unsolved: {exc}"))
            continue
        mc = {}
        mode = trials = seed = None
        if spec.mc_trials:
            mode, trials, seed = spec.mc_mode, spec.mc_trials, spec.seed
            rep = run_trials(TrialPlan(cfg, mode, trials, seed), res.omega, workers=workers)
            mc = {
                "pd_mc": rep.empirical_pd, "pd_ci_low": rep.wilson_ci_pd[0],
                "pd_ci_high": rep.wilson_ci_pd[1], "pfa_mc": rep.empirical_pfa,
                "pfa_ci_low": rep.wilson_ci_pfa[0], "pfa_ci_high": rep.wilson_ci_pfa[1],
            }
        rows.append(SweepRow(cfg, kmax, res.probe_root_group_size, res.omega, res.achieved_miss,
                             res.analytic_pfa, mode, trials, seed, mc, status))
    return rows


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """One row per (grid point, P_D target), in grid order.

    Grid points are independent; with ``workers > 1`` they are evaluated
    concurrently but emitted in grid order.
    """
    if workers > 1 and len(spec.grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda v: _point_rows(spec, v, 1), spec.grid))
    else:
        chunks = [_point_rows(spec, v, max(1, workers)) for v in spec.grid]
    return [row for chunk in chunks for row in chunk]


def emit_csv(rows, destination, columns=SWEEP_COLUMNS) -> None:
    """Write rows (``SweepRow`` or plain dicts) as CSV with a header line.

    ``destination`` is a path or a text stream.  LF line endings; floats
    are printed with 17 significant digits.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        rec = row.record() if hasattr(row, "record") else {k: format_value(v) for k, v in row.items()}
        writer.writerow([rec.get(k, "") for k in columns])
    text = buf.getvalue()
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(destination)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


_CONFIG_REQUIRED = (
    "antennas_M", "pilot_length_L", "user_count_K",
    "arrival_rate_PA", "target_detection_PD", "outage_PO",
)


def _config_from_mapping(data: dict, required=_CONFIG_REQUIRED) -> SystemConfig:
    for key in required:
        if key not in data:
            raise ConfigError(key, "missing required key")
    kwargs = {k: v for k, v in data.items() if k in SystemConfig.field_names()}
    try:
        return SystemConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc


def load_config(path) -> SystemConfig | SweepSpec:
    """Load a flat JSON document as a ``SystemConfig`` or, if it carries an
    ``axis`` key, a ``SweepSpec``.

    In sweep documents the axis field, ``user_count_K`` (when ``couple_kmax``)
    and ``target_detection_PD`` may be omitted.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("path", f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("json", f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("json", f"{path}: top level must be an object")
    known = set(SystemConfig.field_names()) | set(SWEEP_KEYS)
    for key in data:
        if key not in known:
            raise ConfigError(key, "unknown key")
    if "axis" not in data:
        for key in SWEEP_KEYS:
            if key in data:
                raise ConfigError(key, "sweep key in a plain configuration (missing 'axis')")
        return _config_from_mapping(data)

    for key in ("axis", "grid", "pd_targets"):
        if key not in data:
            raise ConfigError(key, "missing required key")
    axis = data["axis"]
    if axis not in AXES:
        raise ConfigError("axis", f"must be one of {AXES}, got {axis!r}")
    grid, pds = data["grid"], data["pd_targets"]
    if not isinstance(grid, list) or not grid:
        raise ConfigError("grid", "must be a non-empty list")
    if not isinstance(pds, list) or not pds:
        raise ConfigError("pd_targets", "must be a non-empty list")
    couple = bool(data.get("couple_kmax", True))
    fixed = dict(data)
    fixed.setdefault(axis, grid[0])
    fixed.setdefault("target_detection_PD", pds[0])
    if couple:
        fixed.setdefault("user_count_K", 1)
    config = _config_from_mapping(fixed)
    return SweepSpec(
        axis=axis,
        grid=tuple(grid),
        fixed=config,
        pd_targets=tuple(pds),
        couple_kmax=couple,
        mc_trials=data.get("mc_trials", 0),
        seed=data.get("seed", 0),
        mc_mode=data.get("mc_mode", "model_faithful"),
    )


# Grids and P_D targets are reconstructions; the source figures do not list them.
FIG2_PRESET = dict(
    axis="antennas_M",
    grid=(32, 64, 128, 256, 512),
    pd_targets=(0.9, 0.99, 0.999),
    fixed=dict(antennas_M=32, pilot_length_L=97, user_count_K=1, arrival_rate_PA=0.1,
               target_detection_PD=0.9, outage_PO=0.1),
)
FIG3_PRESET = dict(
    axis="arrival_rate_PA",
    grid=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9),
    pd_targets=(0.9, 0.99, 0.999),
    fixed=dict(antennas_M=128, pilot_length_L=47, user_count_K=1, arrival_rate_PA=0.1,
               target_detection_PD=0.9, outage_PO=0.1),
)


def preset(name: str, mc_trials: int = 0, seed: int = 0, mc_mode: str = "model_faithful",
           **overrides) -> SweepSpec:
    """``fig2`` (M sweep, L=97, P_A=0.1) or ``fig3`` (P_A sweep, M=128, L=47)."""
    base = {"fig2": FIG2_PRESET, "fig3": FIG3_PRESET}[name]
    fixed = SystemConfig(**{**base["fixed"], **overrides})
    return SweepSpec(base["axis"], base["grid"], fixed, base["pd_targets"],
                     couple_kmax=True, mc_trials=mc_trials, seed=seed, mc_mode=mc_mode)
