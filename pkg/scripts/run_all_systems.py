"""Four-controller comparison on every shipped system.

    python3 scripts/run_all_systems.py [--out runs] [--systems system1 system3]

Prints one table per system and writes evaluation.csv, params.txt and the
learning curves under ``<out>/<system>/``.
"""
import argparse
import time

from pidtune.cli import run_command
from pidtune.config import SHIPPED


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs")
    ap.add_argument("--systems", nargs="+", default=list(SHIPPED), choices=SHIPPED)
    ap.add_argument("--epochs", type=int, default=None)
    args = ap.parse_args()
    for name in args.systems:
        t0 = time.perf_counter()
        argv = ["evaluate", "--config", name, "--out", f"{args.out}/{name}"]
        if args.epochs is not None:
            argv += ["--epochs", str(args.epochs)]
        code = run_command(argv)
        print(f"[{name}] exit {code}, {time.perf_counter() - t0:.0f}s\n")


if __name__ == "__main__":
    main()
