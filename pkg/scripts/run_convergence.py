#!/usr/bin/env python3
"""Convergence study of the trigonometric benchmark (CSV + run log)."""
import sys

from ddrns.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["--mesh", "cubic", "--levels", "2,4,8", "--k", "0",
                            "--re", "1", "--lambda", "1", "--out", "out/convergence"]
    raise SystemExit(main(["--cmd", "convergence"] + args))
