"""End-to-end synthesis timings on thermostat-family data.

    python3 benchmarks/bench_synthesis.py            # desk scale
    python3 benchmarks/bench_synthesis.py --full     # n=7, 60 x 200 points, 15 locations
"""

import argparse

from lhasynth import synthesize
from lhasynth.datagen import generate, thermostat_family


def run(n, r, p, lam, seed):
    series = generate(thermostat_family(n), r, p, 40.0, seed=seed)
    res = synthesize(series, n_locations=lam)
    t = res.report["timings"]
    phases = " ".join(f"{k}={v:.2f}s" for k, v in t.items())
    print(f"n={n} r={r} p={p} lambda={lam}: eps={res.epsilon:.4f} "
          f"constraints={res.report['constraint_count']} LP share={t['lp'] / t['total']:.0%}")
    print(f"  {phases}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--full", action="store_true")
    args = parser.parse_args()
    run(3, 20, 100, 10, seed=8)
    if args.full:
        run(7, 60, 200, 15, seed=7)


if __name__ == "__main__":
    main()
