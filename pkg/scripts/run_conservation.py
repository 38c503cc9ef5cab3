"""Inviscid Beltrami-type flow on the unit cube: K1, K2, H1, H2 should stay flat.

    python3 scripts/run_conservation.py [--out DIR] [extra dualfield flags]
"""
import sys

import numpy as np

from dualfield import io
from dualfield.cli import main


def summarize(out):
    rows = io.read_csv(f"{out}/diagnostics.csv")
    col = lambda k: np.array([r[k] for r in rows])
    K1, K2, H1, H2 = col("K1"), col("K2"), col("H1"), col("H2")
    print(f"steps: {len(rows) - 1}, t_end = {rows[-1]['t']:g}")
    print(f"K1: {K1[0]:.12f}  max rel drift {np.abs(K1 - K1[0]).max() / K1[0]:.2e}")
    print(f"K2: {K2[0]:.12f}  max rel drift {np.abs(K2 - K2[0]).max() / K2[0]:.2e}")
    print(f"H1: {H1[0]:.12f}  max drift {np.abs(H1 - H1[0]).max():.2e}")
    print(f"H2: {H2[0]:.12f}  max drift {np.abs(H2 - H2[0]).max():.2e}")
    print(f"max |H1 - H2| {np.abs(H1 - H2).max():.2e}, max div u2 {col('div_u2_linf').max():.2e}")


if __name__ == "__main__":
    out = "out/conservation"
    args = sys.argv[1:]
    if "--out" in args:
        out = args[args.index("--out") + 1]
    else:
        args += ["--out", out]
    code = main(["--case", "conservation"] + args)
    if code == 0:
        summarize(out)
    sys.exit(code)
