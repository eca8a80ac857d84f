"""Compare compiled and pure-Python model kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse

from smoothsgd.bench import bench_kernels, format_table

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    ap.add_argument("--window", type=int, default=24)
    ap.add_argument("--horizons", type=int, default=24)
    ap.add_argument("--hidden", type=int, default=8)
    args = ap.parse_args()
    print(format_table(bench_kernels(args.window, args.horizons, args.hidden, args.repeat)))
