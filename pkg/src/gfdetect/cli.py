"""Command-line entry point: ``gfdetect <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import replace

from gfdetect.detector import (
    ConfigError,
    SystemConfig,
    build_statistic_model,
    false_alarm_probability,
    max_scheduling_size,
    min_pilot_length,
    miss_probability,
    solve_threshold,
)
from gfdetect.montecarlo import TrialPlan, run_trials
from gfdetect.pilot import PilotSpec, assign_pilots, generate_zc
from gfdetect.runner import OutputError, emit_csv, format_value, load_config, preset, run_sweep

EXIT_CONFIG = 2
EXIT_IO = 3

TAILS = {"gaussian": "gaussian", "exact": "exact_chi_square"}
XCORR = {"paper": "paper_unit", "zc": "true_zc"}
MODES = {"model": "model_faithful", "waveform": "waveform"}

INPUT_COLUMNS = ("M", "L", "K", "P_A", "P_D", "P_O", "snr_db", "noise_var", "tail", "xcorr")


def _add_system_flags(p: argparse.ArgumentParser):
    p.add_argument("--antennas", type=int, required=True, help="BS antennas M")
    p.add_argument("--pilot-len", type=int, required=True, help="prime pilot length L")
    p.add_argument("--users", type=int, default=None,
                   help="scheduled users K (default: maximum scheduling size, capped at L^2-L)")
    p.add_argument("--arrival", type=float, required=True, help="per-subframe activation probability P_A")
    p.add_argument("--pd", type=float, default=0.99, help="target detection probability")
    p.add_argument("--po", type=float, default=0.1, help="outage probability for K_max")
    p.add_argument("--snr-db", type=float, default=15.0)
    p.add_argument("--noise-var", type=float, default=None, help="per-symbol noise variance (default L)")
    p.add_argument("--tail", choices=sorted(TAILS), default="gaussian")
    p.add_argument("--xcorr", choices=sorted(XCORR), default="paper")
    p.add_argument("--probe-group", type=int, default=None, help="probe root-group size K_r")
    p.add_argument("--header", action="store_true", help="print a CSV header line first")


def _config(args) -> SystemConfig:
    K = args.users
    if K is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            K = max_scheduling_size(args.antennas, args.arrival, args.po)
        if K == 0:
            raise ConfigError("user_count_K", "maximum scheduling size is 0; pass --users")
        K = min(K, args.pilot_len**2 - args.pilot_len)
    return SystemConfig(
        antennas_M=args.antennas,
        pilot_length_L=args.pilot_len,
        user_count_K=K,
        arrival_rate_PA=args.arrival,
        target_detection_PD=args.pd,
        outage_PO=args.po,
        pilot_snr_db=args.snr_db,
        noise_per_symbol_variance=args.noise_var,
        tail_model=TAILS[args.tail],
        crosscorr_model=XCORR[args.xcorr],
        probe_root_group_size=args.probe_group,
    )


def _inputs(cfg: SystemConfig) -> dict:
    return dict(zip(INPUT_COLUMNS, (
        cfg.antennas_M, cfg.pilot_length_L, cfg.user_count_K, cfg.arrival_rate_PA,
        cfg.target_detection_PD, cfg.outage_PO, cfg.pilot_snr_db, cfg.noise_variance,
        cfg.tail_model, cfg.crosscorr_model,
    )))


def _print_row(row: dict, header: bool, out):
    if header:
        out.write(",".join(row) + "\n")
    out.write(",".join(format_value(v) for v in row.values()) + "\n")


def cmd_pilot_dump(args, out):
    seq = generate_zc(PilotSpec(args.length, args.root, args.shift))
    out.write("index,re,im\n")
    for i, z in enumerate(seq):
        out.write(f"{i},{z.real:.17g},{z.imag:.17g}\n")


def cmd_threshold(args, out):
    cfg = _config(args)
    res = solve_threshold(cfg)
    row = _inputs(cfg) | {"K_r": res.probe_root_group_size, "omega": res.omega,
                          "miss": res.achieved_miss, "pfa": res.analytic_pfa}
    _print_row(row, args.header, out)


def cmd_pfa(args, out):
    cfg = _config(args)
    if args.omega is None:
        res = solve_threshold(cfg)
        omega, K_r = res.omega, res.probe_root_group_size
    else:
        omega, K_r = args.omega, cfg.probe_group_size
    model = build_statistic_model(cfg, K_r)
    row = _inputs(cfg) | {"K_r": K_r, "omega": float(omega),
                          "miss": miss_probability(omega, model),
                          "pfa": false_alarm_probability(omega, model)}
    _print_row(row, args.header, out)


def _kmax(args) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return max_scheduling_size(args.antennas, args.arrival, args.po)


def cmd_kmax(args, out):
    kmax = _kmax(args)
    row = {"M": args.antennas, "P_A": args.arrival, "P_O": args.po, "kmax": kmax,
           "status": "ok" if kmax else "unsatisfiable"}
    _print_row(row, args.header, out)


def cmd_minlen(args, out):
    kmax = _kmax(args)
    row = {"M": args.antennas, "P_A": args.arrival, "P_O": args.po, "kmax": kmax,
           "min_pilot_len": min_pilot_length(kmax) if kmax else None}
    _print_row(row, args.header, out)


def simulate_row(cfg: SystemConfig, mode: str, trials: int, seed: int, probe_user=None,
                 workers=None) -> dict:
    plan = TrialPlan(cfg, mode, trials, seed, probe_user)
    res = solve_threshold(cfg, build_K_r(plan))
    rep = run_trials(plan, res.omega, workers=workers)
    return _inputs(cfg) | {
        "probe_user": rep.probe_user, "K_r": rep.probe_root_group_size,
        "omega": res.omega, "miss_analytic": res.achieved_miss, "pfa_analytic": res.analytic_pfa,
        "mode": mode, "trials": trials, "seed": seed, "rng": rep.rng_algorithm,
        "pd_mc": rep.empirical_pd, "pd_ci_low": rep.wilson_ci_pd[0], "pd_ci_high": rep.wilson_ci_pd[1],
        "pfa_mc": rep.empirical_pfa, "pfa_ci_low": rep.wilson_ci_pfa[0],
        "pfa_ci_high": rep.wilson_ci_pfa[1],
    }


def build_K_r(plan: TrialPlan) -> int:
    cfg = plan.config
    return assign_pilots(cfg.user_count_K, cfg.pilot_length_L).group_size_of(plan.probe_user())


def cmd_simulate(args, out):
    cfg = _config(args)
    row = simulate_row(cfg, MODES[args.mode], args.trials, args.seed, args.probe_user, args.workers)
    _print_row(row, args.header, out)


def _write_sweep(spec, args, out):
    rows = run_sweep(spec, workers=args.workers or (os.cpu_count() or 1))
    emit_csv(rows, args.out if args.out != "-" else out)


def cmd_sweep(args, out):
    spec = load_config(args.config)
    if isinstance(spec, SystemConfig):
        raise ConfigError("axis", f"{args.config} is a plain configuration, not a sweep")
    overrides = {}
    if args.trials is not None:
        overrides["mc_trials"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = replace(spec, **overrides)
    _write_sweep(spec, args, out)


def cmd_figure(args, out):
    spec = preset(args.command, mc_trials=args.trials or 0, seed=args.seed or 0,
                  mc_mode=MODES[args.mode], tail_model=TAILS[args.tail],
                  crosscorr_model=XCORR[args.xcorr])
    _write_sweep(spec, args, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gfdetect",
        description="Grant-free uplink user detection: thresholds, false alarms, simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pilot", help="Zadoff-Chu pilot utilities")
    psub = p.add_subparsers(dest="pilot_command", required=True)
    d = psub.add_parser("dump", help="print one pilot as CSV rows index,re,im")
    d.add_argument("--length", type=int, required=True)
    d.add_argument("--root", type=int, required=True)
    d.add_argument("--shift", type=int, default=0)
    d.set_defaults(func=cmd_pilot_dump)

    for name, func, help_ in (
        ("threshold", cmd_threshold, "solve the detection threshold"),
        ("pfa", cmd_pfa, "false-alarm probability at a threshold"),
        ("kmax", cmd_kmax, "maximum scheduling size"),
        ("minlen", cmd_minlen, "minimum prime pilot length for K_max users"),
        ("simulate", cmd_simulate, "Monte Carlo check of the analytic threshold"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_system_flags(p)
        p.set_defaults(func=func)
        if name == "pfa":
            p.add_argument("--omega", type=float, default=None, help="threshold (default: solved)")
        if name == "simulate":
            p.add_argument("--mode", choices=sorted(MODES), default="model")
            p.add_argument("--trials", type=int, default=200_000,
                           help="total trials, split evenly between P_D and P_FA")
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--probe-user", type=int, default=None)
            p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("sweep", help="run a sweep described by a JSON file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output CSV path ('-' for stdout)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    for name, desc in (("fig2", "false alarm vs antennas (L=97, P_A=0.1)"),
                       ("fig3", "false alarm vs arrival rate (M=128, L=47)")):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--out", required=True, help="output CSV path ('-' for stdout)")
        p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials per row (0 = analytic only)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=sorted(MODES), default="model")
        p.add_argument("--tail", choices=sorted(TAILS), default="gaussian")
        p.add_argument("--xcorr", choices=sorted(XCORR), default="paper")
        p.add_argument("--workers", type=int, default=None)
        p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except (OutputError, BrokenPipeError) as exc:
        print(f"gfdetect: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"gfdetect: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
