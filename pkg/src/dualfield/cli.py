"""Command-line runner: resolve a config, run a case, write the artifacts.

Outputs in ``output_dir``::

    manifest.json        resolved config, versions, solver backend, status
    diagnostics.csv      one row per integer instant (per-run files for sweeps)
    errors.csv           convergence case: L2 errors per (K, N)
    spectrum.csv         when enabled: shell spectra of u2 at t=0, dumps and t_end
    fields_kNNNNN.vtk    every dump_every steps
    checkpoint_kNNNNN.npz every checkpoint_every steps
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

from . import __version__
from . import diagnostics as dg
from . import io
from .cases import get_case
from .config import ConfigError, RunConfig, parse_config
from .linsolve import SolverError, pick_backend
from .spaces import D, Discretization, midpoint
from .timestepping import DualFieldStepper, StepFailure, march

log = logging.getLogger("dualfield")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dualfield",
        description="Mimetic dual-field Navier-Stokes solver on periodic boxes.",
    )
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--case", help="conservation | dissipation | convergence | tgv | custom")
    p.add_argument("--K", type=int, help="elements per axis")
    p.add_argument("--N", type=int, help="polynomial degree")
    p.add_argument("--dt", help="time step (fractions like 1/20 accepted)")
    p.add_argument("--t-end", dest="t_end", help="final time")
    visc = p.add_mutually_exclusive_group()
    visc.add_argument("--re", dest="Re", help="Reynolds number")
    visc.add_argument("--inviscid", action="store_true", help="Re = infinity")
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--spectrum-n", dest="spectrum_n", type=int,
                   help="sample lattice for energy spectra (enables spectrum.csv)")
    p.add_argument("--dump-every", dest="dump_every", type=int, help="field dump cadence in steps (0 = off)")
    p.add_argument("--dump-n", dest="dump_n", type=int, help="field dump lattice size")
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, help="checkpoint cadence (0 = off)")
    p.add_argument("--diag-every", dest="diag_every", type=int, help="diagnostics cadence in steps")
    p.add_argument("--solver", choices=["auto", "superlu", "pardiso"])
    p.add_argument("--sweep-K", dest="sweep_K", help="convergence sweep K values, e.g. 2,3,4")
    p.add_argument("--sweep-N", dest="sweep_N", help="convergence sweep N values, e.g. 1,2")
    p.add_argument("--resume", help="continue from a checkpoint .npz")
    p.add_argument("-q", "--quiet", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    over = {k: getattr(args, k) for k in (
        "case", "K", "N", "dt", "t_end", "Re", "output_dir", "spectrum_n", "dump_every",
        "dump_n", "checkpoint_every", "diag_every", "solver", "sweep_K", "sweep_N",
    )}
    if args.inviscid:
        over["Re"] = math.inf
    if args.spectrum_n is not None:
        over["spectrum"] = True
    return parse_config(args.config, **over)


class _Outputs:
    """Per-step side effects of a run: CSV rows, dumps, spectra, checkpoints."""

    def __init__(self, cfg: RunConfig, disc: Discretization, out: Path, diag_name="diagnostics.csv",
                 resume_t: float | None = None):
        self.cfg, self.disc, self.out = cfg, disc, out
        self.diag = io.diagnostics_writer(out / diag_name, keep_until=resume_t)
        self.spectra = []
        self.prev = None

    def spectrum(self, t, u):
        k, E = dg.energy_spectrum(self.disc, u, self.cfg.spectrum_n)
        self.spectra.append((t, k, E))

    def dump(self, state, u1, w2):
        """All four velocity/vorticity fields at the integer instant ``state.t``."""
        fields = {"u1": u1, "u2": state.u2_int, "w1": state.w1_int, "w2": w2}
        path = self.out / f"fields_k{state.k:05d}.vtk"
        io.write_vtk(path, self.disc, fields, self.cfg.dump_n, title=f"t={state.t!r}")

    def __call__(self, state, rec):
        cfg = self.cfg
        k = state.k
        if k == 0 or k % cfg.diag_every == 0 or math.isclose(rec.t, cfg.t_end):
            self.diag.write(rec.as_row())
        if cfg.dump_every and self.prev is not None and k % cfg.dump_every == 0:
            self.dump(state, midpoint(self.prev.u1_half, state.u1_half), state.w2_int)
            if cfg.spectrum:
                self.spectrum(rec.t, state.u2_int)
        if cfg.checkpoint_every and k and k % cfg.checkpoint_every == 0:
            io.save_checkpoint(self.out / f"checkpoint_k{k:05d}.npz", self.disc, state, rec)
        self.prev = state

    def close(self):
        self.diag.close()
        if self.cfg.spectrum:
            io.write_spectrum(self.out / "spectrum.csv", self.spectra)


def _stepper(cfg: RunConfig, K: int, N: int):
    case = get_case(cfg.case)
    disc = Discretization.build(K, N, case.box_min, case.box_max)
    return DualFieldStepper(disc, cfg.dt, cfg.Re, case.body_force(cfg.Re), cfg.solver)


def _single(cfg: RunConfig, out: Path, K: int, N: int, diag_name="diagnostics.csv", resume=None):
    stepper = _stepper(cfg, K, N)
    case = get_case(cfg.case)
    u0 = get_case(cfg.initial).u0 if cfg.initial else case.u0
    outputs = _Outputs(cfg, stepper.disc, out, diag_name, None if resume is None else resume[0].t)
    outputs.prev = None if resume is None else resume[0]
    try:
        if resume is None and (cfg.spectrum or cfg.dump_every):
            init = stepper.initial_state(u0)
            if cfg.dump_every:
                outputs.dump(init, init.u1_half, init.w2_half)
            if cfg.spectrum:
                outputs.spectrum(0.0, init.u2_int)
        result = march(stepper, u0, cfg.t_end, 1, cfg.div_samples, on_step=outputs, resume=resume)
        if resume is None and not result.records[1:]:
            outputs(result.state, result.records[0])
        if cfg.spectrum and result.state.k and not (cfg.dump_every and result.state.k % cfg.dump_every == 0):
            outputs.spectrum(result.state.t, result.state.u2_int)
    finally:
        outputs.close()
    return result


def convergence_errors(result) -> dict:
    """L2 errors of every unknown against the exact solution, each at its own instant."""
    case = get_case("convergence")
    disc, st = result.disc, result.state
    last = result.records[-1]
    return {
        "K": disc.mesh.K,
        "N": disc.N,
        "h": float(disc.mesh.h[0]),
        "t": st.t,
        "err_u1": dg.l2_error(disc, st.u1_half, case.exact_u),
        "err_u2": dg.l2_error(disc, st.u2_int, case.exact_u),
        "err_w1": dg.l2_error(disc, st.w1_int, case.exact_omega),
        "err_w2": dg.l2_error(disc, st.w2_half, case.exact_omega),
        "err_P0": dg.l2_error(disc, st.P0, case.exact_P, mean_free=True),
        "err_P3": dg.l2_error(disc, st.P3, case.exact_P, mean_free=True),
        "dual_diff_u": last.dual_diff_u,
        "dual_diff_w": last.dual_diff_w,
    }


def convergence_sweep(cfg: RunConfig, out: Path) -> list[dict]:
    rows = []
    with io.CsvWriter(out / "errors.csv", io.ERROR_COLUMNS) as w:
        for N in cfg.sweep_N:
            for K in cfg.sweep_K:
                log.info("convergence run K=%d N=%d", K, N)
                res = _single(cfg, out, K, N, diag_name=f"diagnostics_K{K}_N{N}.csv")
                row = convergence_errors(res)
                w.write(row)
                rows.append(row)
    return rows


def run_case(cfg: RunConfig, resume: str | None = None) -> int:
    """Run ``cfg`` and write its artifacts; returns a process exit status."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_sys = 3 * (cfg.K * cfg.N) ** 3 * 2 + (cfg.K * cfg.N) ** 3 + 1
    extra = {"solver_backend": pick_backend(n_sys, cfg.solver), "status": "running"}
    io.write_manifest(out / "manifest.json", cfg, **extra)
    t0 = time.time()
    try:
        if cfg.case == "convergence" and resume is None:
            convergence_sweep(cfg, out)
        else:
            state = None
            if resume:
                ck = io.load_checkpoint(resume)
                if (ck["K"], ck["N"]) != (cfg.K, cfg.N) or not math.isclose(ck["dt"], cfg.dt):
                    raise ConfigError(
                        f"checkpoint has K={ck['K']}, N={ck['N']}, dt={ck['dt']}; config has K={cfg.K}, N={cfg.N}, dt={cfg.dt}"
                    )
                state = (ck["state"], ck["record"])
            _single(cfg, out, cfg.K, cfg.N, resume=state)
    except (StepFailure, SolverError, FloatingPointError) as exc:
        log.error("run failed: %s", exc)
        io.write_manifest(out / "manifest.json", cfg, **{**extra, "status": f"failed: {exc}"})
        return EXIT_SOLVER
    io.write_manifest(out / "manifest.json", cfg, **{**extra, "status": "ok"})
    log.info("finished in %.1f s; outputs in %s", time.time() - t0, out)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_case(cfg, resume=args.resume)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
