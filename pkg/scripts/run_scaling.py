"""Scaling study: where the per-iteration time goes as p, n, and k grow.

Runs three bench sweeps on synthetic blobs and prints doubling ratios per
phase. The interesting claims to eyeball:

  n sweep: every phase scales ~linearly, ratio near 2 per doubling.
  k sweep: sigma_p goes quadratic (ratio near 4) while the map phases
           stay near 2, so reduce/solve cost eventually dominates.
  p sweep: map phases shrink with workers, barrier_wait and reduce do not.

On a single-core machine the p sweep measures scheduling overhead only;
the n and k ratios are still meaningful.

Usage:
    python3 scripts/run_scaling.py
    python3 scripts/run_scaling.py --quick --csv scaling.csv
"""

from __future__ import annotations

import argparse
import sys

from augsvm.bench import run_sweep, write_csv


def by_value(rows):
    out: dict[int, dict[str, float]] = {}
    for r in rows:
        out.setdefault(r["value"], {})[r["phase"]] = r["seconds"]
    return out

def print_sweep(title, rows):
    table = by_value(rows)
    values = sorted(table)
    phases = [p for p in table[values[0]] if p != "gram_build"]
    print(f"\n{title}")
    header = f"{'phase':<14}" + "".join(f"{v:>12}" for v in values)
    if len(values) == 2:
        header += f"{'ratio':>9}"
    print(header)
    for phase in phases:
        line = f"{phase:<14}"
        for v in values:
            line += f"{table[v][phase]:>12.6f}"
        if len(values) == 2 and table[values[0]][phase] > 0:
            line += f"{table[values[1]][phase] / table[values[0]][phase]:>9.2f}"
        print(line)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true",
                    help="smaller problems, noisier ratios")
    ap.add_argument("--iters", type=int, default=8)
    ap.add_argument("--csv", help="also dump all rows to this file")
    args = ap.parse_args(argv)

    n_pair = [5000, 10000] if args.quick else [20000, 40000]
    k_pair = [128, 256] if args.quick else [256, 512]
    k_for_n, n_for_k = 32, 3000

    all_rows = []
    rows = run_sweep("n", n_pair, k=k_for_n, iters=args.iters)
    all_rows += rows
    print_sweep(f"n doubling at k={k_for_n} (expect ~2x everywhere)", rows)

    rows = run_sweep("k", k_pair, n=n_for_k, iters=args.iters)
    all_rows += rows
    print_sweep(f"k doubling at n={n_for_k} (expect ~4x sigma_p)", rows)

    rows = run_sweep("p", [1, 2, 4, 8], n=n_pair[0], k=k_for_n,
                     iters=args.iters)
    all_rows += rows
    print_sweep(f"worker sweep at n={n_pair[0]}, k={k_for_n}", rows)

    if args.csv:
        with open(args.csv, "w") as fh:
            write_csv(all_rows, fh)
        print(f"\nwrote {len(all_rows)} rows to {args.csv}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
