#!/usr/bin/env python3
"""Convert a whitespace- or comma-separated PES table to multizeta CSV.

Each input row holds the geometry coordinates followed by the energy.
Lines starting with '#' and blank lines are skipped.

    scripts/import_pes.py raw.dat data/h2o.csv --names r1,r2,theta \
        --energy-column -1 --unit hartree --shift-min
"""

import argparse
import csv
import sys

TO_CM1 = {"cm-1": 1.0, "hartree": 219474.6313705, "ev": 8065.543937, "kcal/mol": 349.7550882}


def rows(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.replace(",", " ").split()
            try:
                yield [float(c) for c in cells]
            except ValueError:
                sys.exit(f"{path}:{lineno}: non-numeric cell")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("src")
    ap.add_argument("dst")
    ap.add_argument("--names", help="comma-separated coordinate names (default x1..xD)")
    ap.add_argument("--energy-column", type=int, default=-1)
    ap.add_argument("--unit", choices=sorted(TO_CM1), default="cm-1", help="unit of the energy column")
    ap.add_argument("--shift-min", action="store_true", help="subtract the minimum energy")
    args = ap.parse_args()

    data = list(rows(args.src))
    if not data:
        sys.exit(f"{args.src}: no data rows")
    width = len(data[0])
    if any(len(r) != width for r in data):
        sys.exit(f"{args.src}: ragged rows")
    e_col = args.energy_column % width
    coords = [[v for j, v in enumerate(r) if j != e_col] for r in data]
    energy = [r[e_col] * TO_CM1[args.unit] for r in data]
    if args.shift_min:
        e0 = min(energy)
        energy = [e - e0 for e in energy]

    names = args.names.split(",") if args.names else [f"x{i + 1}" for i in range(width - 1)]
    if len(names) != width - 1:
        sys.exit(f"expected {width - 1} names, got {len(names)}")
    with open(args.dst, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ["V[cm-1]"])
        for x, e in zip(coords, energy):
            w.writerow([repr(v) for v in x] + [repr(e)])
    print(f"wrote {len(energy)} rows x {width - 1} coordinates to {args.dst}")


if __name__ == "__main__":
    main()
