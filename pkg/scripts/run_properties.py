#!/usr/bin/env python3
"""Structural property suite; exit code 3 on any failure."""
import sys

from ddrns.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["--mesh", "cubic", "--levels", "2", "--k", "0",
                            "--out", "out/properties"]
    raise SystemExit(main(["--cmd", "properties"] + args))
