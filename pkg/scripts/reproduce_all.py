#!/usr/bin/env python3
"""Desk-scale sweep over every benchmark example; prints one summary row each.

Budget is roughly fifteen minutes on two cores. Pass --out to keep the
per-run artifact directories.
"""

import argparse
import subprocess
import sys
import time

from gsn import bench


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    t0 = time.perf_counter()
    for example in bench.EXAMPLE_IDS:
        cmd = [sys.executable, "scripts/run_example.py", example, "--seed", str(args.seed)]
        if args.out:
            cmd += ["--out", args.out]
        print(f"=== {example} ===")
        code = subprocess.call(cmd)
        if code != 0:
            return code
    print(f"total: {(time.perf_counter() - t0) / 60:.1f} min")
    return 0


if __name__ == "__main__":
    sys.exit(main())
