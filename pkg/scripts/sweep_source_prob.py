"""Distortion curves against the source probability at fixed channel noise.

Emits the sweep CSV on stdout; redirect to keep it.  Extra command line
arguments are passed through, e.g. --workers 8.
"""
import sys

from rtcode.cli import main

ARGS = [
    "sweep",
    "--fix", "delta=0.3",
    "--vary", "p=0:0.5:0.025",
    "--quantities", "D0,Dinf,Ddm",
    "--d", "1",
    "--m", "0,1,2",
    "--tol", "1e-9",
]

if __name__ == "__main__":
    sys.exit(main(ARGS + sys.argv[1:]))
