"""Scan where two-step-memory lookahead coding strictly beats symbol maps.

Writes the per-point flag CSV to region_d1_m2.csv and a summary JSON to
stdout.  Extra command line arguments are passed through, e.g.
--workers 8 or a different --csv path.
"""
import sys

from rtcode.cli import main

ARGS = [
    "region",
    "--d", "1",
    "--m", "2",
    "--p", "0:0.5:0.025",
    "--delta", "0:0.5:0.025",
    "--margin", "1e-6",
    "--tol", "1e-9",
    "--csv", "region_d1_m2.csv",
]

if __name__ == "__main__":
    sys.exit(main(ARGS + sys.argv[1:]))
