"""Manufactured-solution sweep over h in {1/2, 1/3, 1/4} and N in {1, 2}.

Defaults follow the acceptance setting (Re = 1, t_end = 1, dt = 1/200); pass
``--t-end 2 --dt 1/50`` for the coarser reference setting.

    python3 scripts/run_convergence.py [--out DIR] [extra dualfield flags]
"""
import sys

import numpy as np

from dualfield import io
from dualfield.cli import main


def summarize(out):
    rows = io.read_csv(f"{out}/errors.csv")
    print(f"{'N':>2} {'K':>2} {'err_u1':>10} {'err_u2':>10} {'err_w1':>10} {'err_w2':>10} {'err_P0':>10} {'err_P3':>10}")
    for r in rows:
        print(f"{int(r['N']):2d} {int(r['K']):2d} " + " ".join(f"{r[k]:10.3e}" for k in
              ("err_u1", "err_u2", "err_w1", "err_w2", "err_P0", "err_P3")))
    for N in sorted({int(r["N"]) for r in rows}):
        sub = [r for r in rows if int(r["N"]) == N]
        if len(sub) < 2:
            continue
        h = np.log([r["h"] for r in sub])
        slopes = {k: np.polyfit(h, np.log([r[k] for r in sub]), 1)[0] for k in ("err_u1", "err_u2", "err_w1", "err_w2")}
        print(f"N={N} least-squares slopes: " + ", ".join(f"{k} {v:.2f}" for k, v in slopes.items()))


if __name__ == "__main__":
    out = "out/convergence"
    args = sys.argv[1:]
    if "--out" in args:
        out = args[args.index("--out") + 1]
    else:
        args += ["--out", out]
    defaults = ["--case", "convergence", "--t-end", "1", "--dt", "1/200"]
    code = main(defaults + args)
    if code == 0:
        summarize(out)
    sys.exit(code)
