"""Taylor-Green vortex, Re = 500, K = 8, N = 2 on [-pi, pi]^3 (about 20 minutes with PARDISO).

Writes spectra every 40 steps and a checkpoint every 20; an interrupted run
continues with ``--resume out/tgv/checkpoint_kNNNNN.npz``.

    python3 scripts/run_tgv.py [--out DIR] [extra dualfield flags]
"""
import sys

import numpy as np

from dualfield import io
from dualfield.cli import main


def summarize(out):
    rows = io.read_csv(f"{out}/diagnostics.csv")
    col = lambda k: np.array([r[k] for r in rows])
    t, ens = col("t"), col("E1_vol")
    print(f"K(0)/V = {rows[0]['K2_vol']:.6f}, K(end)/V = {rows[-1]['K2_vol']:.6f}")
    print(f"max |H1| = {np.abs(col('H1')).max():.1e}, max |D| = {np.abs(col('helicity_rate')).max():.1e}")
    print(f"enstrophy/V peak {ens.max():.4f} at t = {t[np.argmax(ens)]:.2f}")


if __name__ == "__main__":
    out = "out/tgv"
    args = sys.argv[1:]
    if "--out" in args:
        out = args[args.index("--out") + 1]
    else:
        args += ["--out", out]
    defaults = ["--case", "tgv", "--spectrum-n", "64", "--dump-every", "40", "--dump-n", "32", "--checkpoint-every", "20"]
    code = main(defaults + args)
    if code == 0:
        summarize(out)
    sys.exit(code)
