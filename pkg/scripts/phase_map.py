#!/usr/bin/env python3
"""Phase diagram of the exponential model over a tail-weight grid.

For exponential fitness and threshold marks both regime questions are
decided by the ratio of the tail parameters, so the diagram splits along
the diagonal: heavier threshold tails make survivors rare enough that
total wipe-outs keep recurring, heavier fitness tails let one champion
outrun the thresholds forever.  The script classifies every grid pair,
prints the map, and writes the full table (verdicts plus criterion
integrals) as CSV.

Run from the repository root:

    python3 scripts/phase_map.py --out phase_map.csv
"""

import argparse
import csv
import math
import sys

from threshold_gms import Exponential, ModelParams, classify

SYMBOLS = {
    ("Transient", "Infinite"): "T",
    ("Recurrent", "Finite"): "F",
    ("Recurrent", "Infinite"): "o",
}

LEGEND = (
    "T  transient: finitely many total extinctions, population escapes\n"
    "F  recurrent with a finite long-run configuration\n"
    "o  boundary: recurrent, but the long-run configuration diverges"
)


def parse_grid(text: str) -> list[float]:
    values = [float(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise ValueError("grid needs at least one value")
    return values


def cell(value):
    if value is None:
        return ""
    if math.isinf(value):
        return "inf"
    return f"{value:.9g}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--alphas",
        default="0.5,0.75,1.0,1.25,1.5,2.0,3.0",
        help="comma-separated tail parameters used for both axes",
    )
    parser.add_argument("--lambda-birth", type=float, default=1.0)
    parser.add_argument("--lambda-extinct", type=float, default=1.0)
    parser.add_argument("--out", help="optional CSV path for the full table")
    args = parser.parse_args(argv)

    alphas = parse_grid(args.alphas)
    rows = []
    for a_fit in alphas:
        for a_thr in alphas:
            params = ModelParams(
                lambda_birth=args.lambda_birth,
                lambda_extinct=args.lambda_extinct,
                fitness_dist=Exponential(a_fit),
                threshold_dist=Exponential(a_thr),
            )
            rows.append((a_fit, a_thr, classify(params)))

    print(f"rates: birth {args.lambda_birth:g}, extinction {args.lambda_extinct:g}")
    print()
    header = "fitness \\ threshold |" + "".join(f" {a:>5g}" for a in alphas)
    print(header)
    print("-" * len(header))
    by_pair = {(a, b): rep for a, b, rep in rows}
    for a_fit in alphas:
        line = f"{a_fit:>19g} |"
        for a_thr in alphas:
            rep = by_pair[(a_fit, a_thr)]
            line += f" {SYMBOLS[(rep.recurrence, rep.limit_count)]:>5}"
        print(line)
    print()
    print(LEGEND)

    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                [
                    "alpha_fitness",
                    "alpha_threshold",
                    "recurrence",
                    "limit_count",
                    "method",
                    "null_recurrent_like",
                    "e_m",
                    "e_n",
                    "phi_inf",
                    "phi_bar_inf",
                ]
            )
            for a_fit, a_thr, rep in rows:
                writer.writerow(
                    [
                        f"{a_fit:g}",
                        f"{a_thr:g}",
                        rep.recurrence,
                        rep.limit_count,
                        rep.method,
                        str(rep.null_recurrent_like).lower(),
                        cell(rep.integrals.e_m),
                        cell(rep.integrals.e_n),
                        cell(rep.integrals.phi_inf),
                        cell(rep.integrals.phi_bar_inf),
                    ]
                )
        print(f"\nwrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
