#!/usr/bin/env python3
"""Run every verification suite and write one JSON report per suite.

Usage:  python scripts/run_all_suites.py [--seed N] [--out DIR] [--nmax 6]

Exit code 0 when every suite passes, 1 otherwise.
"""

import argparse
import json
import pathlib
import sys
import time

from loopbrackets import verify
from loopbrackets.cli import atomic_write


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--nmax", type=int, default=6,
                    help="largest field count for the Poisson suites")
    args = ap.parse_args()

    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    runs = [("identities", lambda: verify.run_identity_suite(seed=args.seed)),
            ("oracle", lambda: verify.run_oracle_suite(seed=args.seed)),
            ("prop2", lambda: verify.run_prop2_suite(seed=args.seed)),
            ("cp2", lambda: verify.run_cp2_suite()),
            ("nogo", lambda: verify.run_nogo_suite(seed=args.seed))]
    runs += [(f"thm2_n{n}", lambda n=n: verify.run_thm2_suite(
        n=n, seed=args.seed)) for n in (2, 3)]
    runs += [(f"poisson_n{n}", lambda n=n: verify.run_poisson_suite(
        n=n, seed=args.seed)) for n in range(2, args.nmax + 1)]

    all_pass = True
    for name, fn in runs:
        t0 = time.time()
        rep = fn()
        path = outdir / f"{name}.json"
        atomic_write(str(path), rep.to_json(include_duration=True))
        status = "pass" if rep.passed else "FAIL"
        print(f"{name:14s} {status}  ({time.time() - t0:6.1f}s)  -> {path}")
        all_pass &= rep.passed

    summary = {"seed": args.seed,
               "suites": {name: json.loads((outdir / f"{name}.json")
                                           .read_text())["passed"]
                          for name, _ in runs}}
    atomic_write(str(outdir / "summary.json"),
                 json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
