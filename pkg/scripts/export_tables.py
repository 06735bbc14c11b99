#!/usr/bin/env python3
"""Export the structure-constant tables for a range of field counts,
from both derivation routes, and confirm they agree entry for entry.

Usage:  python scripts/export_tables.py [--nmin 2] [--nmax 6] [--out DIR]
"""

import argparse
import json
import pathlib
import sys
import time

from loopbrackets import models
from loopbrackets.cli import atomic_write


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmin", type=int, default=2)
    ap.add_argument("--nmax", type=int, default=6)
    ap.add_argument("--out", default="tables")
    args = ap.parse_args()

    outdir = pathlib.Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    ok = True
    for n in range(args.nmin, args.nmax + 1):
        t0 = time.time()
        a = models.thm3_extract(n)
        b = models.appendix_table(n)
        mismatches = models.match_structconsts(a, b)
        for sc, tag in ((a, "extract"), (b, "closed_form")):
            doc = models.structconsts_to_document(sc)
            path = outdir / f"structconsts_n{n}_{tag}.json"
            atomic_write(str(path),
                         json.dumps(doc, indent=2, sort_keys=True) + "\n")
        status = "exact match" if not mismatches else \
            f"{len(mismatches)} MISMATCHES"
        print(f"n={n}: {status}  ({time.time() - t0:.1f}s)")
        for m in mismatches[:5]:
            print("   ", m)
        ok &= not mismatches
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
