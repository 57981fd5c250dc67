#!/usr/bin/env python3
"""Brute-force lemma audit over a batch of seeded Gaussian matrices.

Usage:
    python scripts/run_lemma_audit.py [--matrices 100] [--seed 0]

Prints one line per matrix and a final tally; exits nonzero on any violated
inequality (skipped cells are listed, never counted as passes).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tsgbomp.analysis import verify_lemmas
from tsgbomp.sensing import gaussian_matrix
from tsgbomp.signal_model import PibsParams


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--matrices", type=int, default=100)
    ap.add_argument("--m", type=int, default=40)
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = PibsParams.from_window(n=args.n, b=2, p=2, l=10, L=4, K=2, R=2)
    failures = 0
    t0 = time.time()
    for i in range(args.matrices):
        rng = np.random.default_rng(args.seed + i)
        Phi = gaussian_matrix(args.m, args.n, "unit", True, rng)
        report = verify_lemmas(Phi, params, 2, 2, rng)
        status = "pass" if report.all_passed else "FAIL"
        if not report.all_passed:
            failures += 1
            sys.stdout.write(report.render())
        print(f"matrix {i}: {status}")
    print(f"{args.matrices} matrices in {time.time() - t0:.0f}s, {failures} failures")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
