"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Each kernel is timed on both backends with identical inputs; results are
checked for agreement before the timings are printed.
"""
import argparse
import math
import time

import numpy as np

from gfdetect import _backend
from gfdetect.detector import SystemConfig, build_statistic_model, max_scheduling_size
from gfdetect.pilot import assign_pilots, pilot_matrix


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    K = max_scheduling_size(128, 0.1, 0.1)
    cfg = SystemConfig(antennas_M=128, pilot_length_L=97, user_count_K=K, arrival_rate_PA=0.1,
                       target_detection_PD=0.99, outage_PO=0.1, tail_model="exact_chi_square")
    model = build_statistic_model(cfg)
    s = model.support
    cum = model.cumulative_weights()
    omegas = np.linspace(0.5, 1.5, 200) * 2 * 128 * float(model.var_active[len(model.q) // 10])

    wcfg = SystemConfig(antennas_M=64, pilot_length_L=31, user_count_K=300, arrival_rate_PA=0.2,
                        target_detection_PD=0.99, outage_PO=0.1)
    psi = pilot_matrix(assign_pilots(300, 31))
    probe = 9
    gains = psi.conj().T @ psi[:, probe]
    wargs = (0.2, probe, False, gains, math.sqrt(wcfg.pilot_power), math.sqrt(wcfg.noise_variance),
             64, psi[:, probe])

    return [
        ("mixture_cdf x200 (exact, M=128)",
         lambda k: [k.mixture_cdf(float(w), model.var_active[s], model.weights[s], 128, True, False)
                    for w in omegas]),
        ("model_faithful_draws 50k (M=128)",
         lambda k: k.model_faithful_draws(cum, model.var_idle, 128, 1, 0, 0, 50_000)),
        ("waveform_draws 200 (M=64, L=31, K=300)",
         lambda k: k.waveform_draws(*wargs, 1, 1, 0, 200)),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    names = _backend.available()
    if "compiled" not in names:
        print("compiled backend not built; timing the fallback only")
    mods = {n: _backend.load(n) for n in names}
    print(f"{'kernel':42s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases():
        row, outs = [], []
        for n in names:
            t, out = best_of(lambda: fn(mods[n]), args.repeat)
            row.append(t)
            outs.append(np.asarray(out, dtype=float))
        if len(outs) > 1:
            np.testing.assert_allclose(outs[0], outs[1], rtol=1e-9)
        line = f"{label:42s}" + "".join(f"{t * 1e3:10.1f}ms" for t in row)
        if len(row) > 1:
            line += f"{row[1] / row[0]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
