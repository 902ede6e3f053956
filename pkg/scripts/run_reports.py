"""Canonical report pipeline over the bundled map catalog.

Runs one representative case per CLI subcommand and collects every CSV the
package emits under a single output root.  The reproducibility check runs
this script twice with different REGVAR_THREADS settings and byte-compares
the resulting trees, so the case list below is the reference workload and
should stay deterministic and reasonably fast (a few minutes end to end).

Usage: python scripts/run_reports.py [--out DIR]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from regvar.cli import main as cli_main

CASES: tuple[tuple[str, list[str]], ...] = (
    (
        "rate_identity1d",
        ["rate", "--spec", "catalog:identity1d", "--at", "0,0"],
    ),
    (
        "rate_interval_gap",
        ["rate", "--spec", "catalog:interval_gap", "--at", "0,0"],
    ),
    (
        "critical_square1d",
        ["critical", "--spec", "catalog:square1d", "--budget", "4000"],
    ),
    (
        "critical_fold2d",
        ["critical", "--spec", "catalog:fold2d", "--budget", "4000"],
    ),
    (
        "asymptotic_recip1d",
        [
            "asymptotic",
            "--spec",
            "catalog:recip1d",
            "--eta",
            "linear",
            "--budget",
            "48",
            "--tau",
            "0.02",
            "--seed",
            "4",
        ],
    ),
    (
        "calculus_identity1d",
        ["calculus", "--spec", "catalog:identity1d", "--levels", "3"],
    ),
)


def run(out_root: Path) -> int:
    failures = 0
    for name, argv in CASES:
        out = out_root / name
        t0 = time.perf_counter()
        code = cli_main(argv + ["--out", str(out)])
        dt = time.perf_counter() - t0
        status = "ok" if code == 0 else f"exit {code}"
        print(f"{name}: {status} ({dt:.1f} s)")
        if code != 0:
            failures += 1
    return failures


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=str, default="reports")
    ns = parser.parse_args(argv)
    failures = run(Path(ns.out))
    if failures:
        print(f"{failures} case(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
