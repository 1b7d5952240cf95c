"""Time the compiled entmax kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--rows 16384] [--width 16] [--reps 5]
"""

import argparse

from armlet import sparse_softmax
from armlet.benchmark import compare_backends


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=16384)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--alphas", type=float, nargs="+", default=[1.0, 1.5, 1.7, 2.0])
    args = p.parse_args()

    backends = sparse_softmax.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; timing the numpy fallback only")
    rows = compare_backends(args.rows, args.width, args.alphas, args.reps)
    print(f"{args.rows} rows x {args.width}, median of {args.reps - 1} timed reps (ms)")
    header = f"{'alpha':>6}" + "".join(f"{b + ' ' + d:>20}" for b in backends for d in ("fwd", "bwd"))
    if len(backends) == 2:
        header += f"{'speedup fwd':>13}{'speedup bwd':>13}"
    print(header)
    for r in rows:
        line = f"{r['alpha']:>6}" + "".join(
            f"{1e3 * r[f'{b}_{d}']:>20.2f}" for b in backends for d in ("forward", "backward"))
        if len(backends) == 2:
            line += "".join(f"{r[f'python_{d}'] / r[f'compiled_{d}']:>12.1f}x"
                            for d in ("forward", "backward"))
        print(line)


if __name__ == "__main__":
    main()
