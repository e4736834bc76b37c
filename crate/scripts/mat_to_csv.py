#!/usr/bin/env python3
"""Convert an ODDS-style .mat file (arrays X and y) to CSV with a `label` column."""

import argparse
import csv

import numpy as np
from scipy.io import loadmat


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("mat", help="input .mat file with X (n x d) and y (n x 1)")
    parser.add_argument("csv", help="output CSV path")
    args = parser.parse_args()

    data = loadmat(args.mat)
    x = np.asarray(data["X"], dtype=float)
    y = np.asarray(data["y"]).reshape(-1).astype(int)
    if x.shape[0] != y.shape[0]:
        raise SystemExit(f"X has {x.shape[0]} rows but y has {y.shape[0]}")

    with open(args.csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"x{j}" for j in range(x.shape[1])] + ["label"])
        for row, label in zip(x, y):
            writer.writerow([repr(float(v)) for v in row] + [label])
    print(f"wrote {x.shape[0]} rows, {x.shape[1]} features, {int(y.sum())} anomalies")


if __name__ == "__main__":
    main()
