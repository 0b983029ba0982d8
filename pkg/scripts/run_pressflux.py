#!/usr/bin/env python3
"""Mixed pressure/flux boundary-condition runs (discrete norms per level)."""
import sys

from ddrns.cli import main

if __name__ == "__main__":
    args = sys.argv[1:] or ["--mesh", "cubic", "--levels", "4,8", "--k", "0",
                            "--re", "100", "--out", "out/pressflux"]
    raise SystemExit(main(["--cmd", "pressflux"] + args))
