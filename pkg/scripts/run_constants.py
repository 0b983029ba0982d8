#!/usr/bin/env python3
"""Discrete Poincare / continuity / Sobolev constants and chi diagnostic."""
import sys

from ddrns.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["--mesh", "cubic", "--levels", "1,2,3", "--k", "0",
                            "--out", "out/constants"]
    raise SystemExit(main(["--cmd", "constants"] + args))
