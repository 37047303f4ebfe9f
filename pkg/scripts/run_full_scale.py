#!/usr/bin/env python3
"""Full-scale runs (n=128, A is 6516x16384): expect tens of minutes overall.

The angle study runs 100 iterations at this preset; everything else runs 50.
"""

import sys
from pathlib import Path

from igenkrylov import cli

RESULTS = Path("results/full")

RUNS = [
    ["verify-relations", "--preset", "paper", "--out", str(RESULTS / "verify-relations")],
    ["reconstruct", "--preset", "paper", "--mode", "igengk", "--reg", "none",
     "--out", str(RESULTS / "reconstruct-unregularized")],
    ["reconstruct", "--preset", "paper", "--mode", "igengk", "--reg", "opt",
     "--out", str(RESULTS / "reconstruct-hybrid")],
    ["compare-reg", "--preset", "paper", "--mode", "igengk",
     "--out", str(RESULTS / "compare-reg")],
    ["inexact-angles", "--preset", "paper", "--mode", "igengk", "--reg", "opt",
     "--out", str(RESULTS / "inexact-angles")],
]


def main():
    extra = sys.argv[1:]
    for args in RUNS:
        print("-> igenkrylov", " ".join(args + extra), flush=True)
        rc = cli.main(args + extra)
        if rc != 0:
            print(f"command failed with exit code {rc}", file=sys.stderr)
            return rc
    print(f"all runs complete under {RESULTS}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
