"""Viscous (Re = 100) run: discrete energy and helicity balances hold step by step.

    python3 scripts/run_dissipation.py [--out DIR] [extra dualfield flags]
"""
import sys

import numpy as np

from dualfield import io
from dualfield.cli import main


def summarize(out):
    rows = io.read_csv(f"{out}/diagnostics.csv")[1:]
    for k in ("residual_K2", "residual_K1", "residual_H"):
        print(f"max |{k}| = {max(abs(r[k]) for r in rows):.2e}")
    for k in ("K1", "K2"):
        v = np.array([r[k] for r in rows])
        print(f"{k}: {v[0]:.6f} -> {v[-1]:.6f}, largest step increase {np.diff(v).max():.2e}")


if __name__ == "__main__":
    out = "out/dissipation"
    args = sys.argv[1:]
    if "--out" in args:
        out = args[args.index("--out") + 1]
    else:
        args += ["--out", out]
    code = main(["--case", "dissipation"] + args)
    if code == 0:
        summarize(out)
    sys.exit(code)
