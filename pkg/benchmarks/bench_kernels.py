"""Compare the numba and numpy backends on the hot kernels.

Runs itself twice as a subprocess, once per HEATSENTRY_BACKEND value, so each
timing sees a freshly selected backend; the parent prints a comparison table.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def _timeit(fn, repeats):
    fn()  # warm up (jit compilation, caches)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def run_worker(repeats):
    import numpy as np

    from heatsentry import backend
    from heatsentry.autoencoder import AEConfig, init_model, train
    from heatsentry.scoring import run_criticality

    rng = np.random.default_rng(0)

    # one training epoch on a realistic problem size: 28 days x 8 features
    x = rng.normal(size=(4032, 8))
    config = AEConfig(hidden_units=(64, 32), latent_fraction=0.65,
                      epochs=3, batch_size=256, seed=0)
    model = init_model(n_features=8, config=config)

    def bench_train():
        train(model, x)

    # sparse bias descent over a detection window (one day of samples)
    from heatsentry.attribution import ArcanaConfig, optimize_bias

    window = rng.normal(size=(144, 8))
    arcana = ArcanaConfig(alpha=0.8, max_iters=300, step_size=0.01)

    def bench_arcana():
        optimize_bias(model, window, config=arcana)

    # criticality counter over a year of 10-minute samples
    flags = rng.random(52560) < 0.05
    frozen = rng.random(52560) < 0.01

    def bench_counter():
        run_criticality(flags, frozen)

    results = {
        "backend": backend.BACKEND,
        "train_3_epochs_s": _timeit(bench_train, repeats),
        "arcana_300_iters_s": _timeit(bench_arcana, repeats),
        "counter_1y_s": _timeit(bench_counter, max(repeats, 5)),
    }
    json.dump(results, sys.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repetitions; the best run is reported")
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        run_worker(args.repeats)
        return

    timings = {}
    for name in ("numpy", "numba"):
        env = dict(os.environ, HEATSENTRY_BACKEND=name)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__),
             "--worker", "--repeats", str(args.repeats)],
            capture_output=True, text=True, env=env,
        )
        if proc.returncode != 0:
            print(f"{name} worker failed:\n{proc.stderr}", file=sys.stderr)
            sys.exit(1)
        timings[name] = json.loads(proc.stdout)
        if timings[name]["backend"] != name:
            print(f"warning: requested {name}, got {timings[name]['backend']} "
                  "(numba not importable?)", file=sys.stderr)

    keys = [k for k in timings["numpy"] if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"{'kernel':<{width}}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for key in keys:
        a = timings["numpy"][key]
        b = timings["numba"][key]
        ratio = a / b if b > 0 else float("inf")
        print(f"{key:<{width}}  {a:>10.4f}  {b:>10.4f}  {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
