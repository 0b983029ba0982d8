#!/usr/bin/env python3
"""Paired pressure-scaling runs: velocity errors should be unaffected."""
import sys

from ddrns.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["--mesh", "cubic", "--levels", "4", "--k", "0",
                            "--out", "out/robustness"]
    raise SystemExit(main(["--cmd", "robustness"] + args))
