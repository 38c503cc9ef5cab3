"""Staggered dual-field time march.

Integer steps advance ``(u2, w1)`` from ``t^{k-1}`` to ``t^k`` using the
vorticity ``w2`` at ``t^{k-1/2}``; half-integer steps advance ``(u1, w2)`` from
``t^{k-1/2}`` to ``t^{k+1/2}`` using ``w1`` at ``t^k``. Both are implicit
midpoint (lowest-order Gauss) steps whose convective matrix is frozen at the
borrowed vorticity, so each step is one linear saddle-point solve. A single
explicit-Euler half step produces ``u1, w2`` at ``t^{1/2}`` to start.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import linsolve
from .assembly import (
    SystemMatrices,
    assemble_load,
    assemble_rotation_curl,
    assemble_rotation_div,
    assemble_system,
    structural_sum,
)
from .spaces import C, D, G, S, Discretization, Field, midpoint

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    def __init__(self, step: str, k: int, cause: Exception):
        super().__init__(f"{step} step k={k} failed: {cause}")
        self.step, self.k = step, k


@dataclass
class SimState:
    """Snapshot after ``k`` integer steps (and the half step that follows each)."""

    u1_half: Field  # C, t^{k+1/2} (t^0 before the bootstrap)
    w2_half: Field  # D, t^{k+1/2}
    u2_int: Field  # D, t^k
    w1_int: Field  # C, t^k
    P0: Field  # G, t^k
    P3: Field  # S, t^{k-1/2}
    k: int
    dt: float
    Re: float
    bootstrapped: bool = False
    # D vorticity at t^k: midpoint of the two neighbouring half-instant solutions
    w2_int: Optional[Field] = None

    @property
    def t(self) -> float:
        return self.k * self.dt


@dataclass
class LinearSystem:
    """Block saddle-point system ``[A, B^T; B, 0]`` plus one mean-zero multiplier.

    ``layout`` names the unknown blocks in order; the pressure block is last
    before the multiplier, and ``mean_weights`` is the row that pins it.
    """

    blocks: list
    rhs: list
    layout: tuple
    mean_weights: np.ndarray

    def matrix(self) -> sp.csr_matrix:
        c = sp.csr_matrix(self.mean_weights.reshape(1, -1))
        nb = len(self.blocks)
        rows = [list(r) + [None] for r in self.blocks]
        rows[-1][-1] = c.T
        rows.append([None] * (nb - 1) + [c, None])
        return sp.bmat(rows, format="csr")

    def vector(self) -> np.ndarray:
        return np.concatenate(list(self.rhs) + [np.zeros(1)])

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        sizes = [len(r) for r in self.rhs]
        parts = np.split(x, np.cumsum(sizes))
        return parts[:-1]

    def solve(self, backend: str = "auto") -> list[np.ndarray]:
        A = self.matrix()
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"saddle-point system is not square: {A.shape}")
        x = linsolve.solve(A, self.vector(), backend)
        self.residual = float(np.max(np.abs(A @ x - self.vector())))
        self.multiplier = float(x[-1])
        return self.split(x)


def _inv(Re: float) -> float:
    return 0.0 if math.isinf(Re) else 1.0 / Re


class DualFieldStepper:
    """Holds the constant matrices and performs bootstrap, integer and half-integer steps."""

    def __init__(
        self,
        disc: Discretization,
        dt: float,
        Re: float = math.inf,
        force: Optional[Callable] = None,
        backend: str = "auto",
        matrices: SystemMatrices | None = None,
    ):
        if not dt > 0:
            raise ValueError(f"time step must be positive, got {dt}")
        if not Re > 0:
            raise ValueError(f"Reynolds number must be positive, got {Re}")
        self.disc = disc
        self.dt = float(dt)
        self.Re = float(Re)
        self.force = force
        self.backend = backend
        self.mats = matrices or assemble_system(disc)
        E = disc.incidence.as_float
        self.E_curl, self.E_div, self.E_grad = E.E_curl, E.E_div, E.E_grad
        # integrals of the basis functions: the mean-zero constraint rows
        self.mean_G = self.mats.M_G @ np.ones(disc.ndofs(G))
        self.mean_S = self.mats.M_S @ disc.project(lambda x, y, z, t: 1.0 + 0 * x, S).coeffs
        self.last_residuals: dict[str, float] = {}

    # -- helpers ------------------------------------------------------------
    def load(self, kind, t) -> np.ndarray:
        return assemble_load(self.disc, self.force, kind, t) if self.force is not None else 0.0

    def weak_curl(self, u2: Field) -> Field:
        """``w1 = M^{-1} C^T u2``: the C-space vorticity dual to a D-space velocity."""
        x = linsolve.solve(self.mats.M, self.mats.Cmat.T @ u2.coeffs, self.backend)
        return Field(C, x, u2.time_tag)

    def strong_curl(self, u1: Field) -> Field:
        return Field(D, self.E_curl @ u1.coeffs, u1.time_tag)

    def initial_state(self, u0: Callable, t0: float = 0.0) -> SimState:
        disc = self.disc
        u1 = disc.project(u0, C, t0)
        u2 = disc.project(u0, D, t0)
        return SimState(
            u1_half=u1,
            w2_half=self.strong_curl(u1),
            u2_int=u2,
            w1_int=self.weak_curl(u2),
            P0=disc.zeros(G, t0),
            P3=disc.zeros(S, t0),
            k=0,
            dt=self.dt,
            Re=self.Re,
        )

    def _solve(self, name: str, k: int, system: LinearSystem):
        try:
            parts = system.solve(self.backend)
        except (linsolve.SolverError, ValueError) as exc:
            raise StepFailure(name, k, exc) from exc
        self.last_residuals[name] = system.residual
        for p in parts:
            if not np.all(np.isfinite(p)):
                raise StepFailure(name, k, FloatingPointError("NaN/Inf in solution"))
        return parts

    # -- steps --------------------------------------------------------------
    def bootstrap_step(self, state: SimState) -> SimState:
        """Explicit Euler over ``dt/2`` for ``u1`` with constraints imposed at ``t^{1/2}``."""
        m, dt, ir = self.mats, self.dt, _inv(self.Re)
        u1, w2, w1 = state.u1_half, state.w2_half, state.w1_int
        t0 = state.t
        R = assemble_rotation_curl(self.disc, w1)
        rhs = (2.0 / dt) * (m.M @ u1.coeffs) - R @ u1.coeffs - ir * (m.Cmat.T @ w2.coeffs)
        rhs = rhs + self.load(C, t0)
        nD, nG = self.disc.ndofs(D), self.disc.ndofs(G)
        system = LinearSystem(
            blocks=[[(2.0 / dt) * m.M, None, m.Gmat], [m.Cmat, -m.N, None], [m.Gmat.T, None, None]],
            rhs=[rhs, np.zeros(nD), np.zeros(nG)],
            layout=("u1", "w2", "P0"),
            mean_weights=self.mean_G,
        )
        u1n, w2n, P0 = self._solve("bootstrap", 0, system)
        th = t0 + 0.5 * dt
        return replace(
            state,
            u1_half=Field(C, u1n, th),
            w2_half=Field(D, w2n, th),
            P0=Field(G, P0, t0),
            bootstrapped=True,
            w2_int=w2,
        )

    def integer_step(self, state: SimState) -> SimState:
        """Advance ``u2, w1`` from ``t^k`` to ``t^{k+1}``; also yields ``P3`` at ``t^{k+1/2}``."""
        m, dt, ir = self.mats, self.dt, _inv(self.Re)
        k = state.k + 1
        u2, w1, w2h = state.u2_int, state.w1_int, state.w2_half
        R = assemble_rotation_div(self.disc, w2h)
        Nd = m.N / dt
        rhs = (Nd - 0.5 * R) @ u2.coeffs - 0.5 * ir * (m.Cmat @ w1.coeffs)
        rhs = rhs + self.load(D, state.t + 0.5 * dt)
        nC, nS = self.disc.ndofs(C), self.disc.ndofs(S)
        system = LinearSystem(
            blocks=[
                [structural_sum((1.0, Nd), (0.5, R)), 0.5 * ir * m.Cmat, -m.Dmat.T],
                [m.Cmat.T, -m.M, None],
                [m.Dmat, None, None],
            ],
            rhs=[rhs, np.zeros(nC), np.zeros(nS)],
            layout=("u2", "w1", "P3"),
            mean_weights=self.mean_S,
        )
        u2n, w1n, P3 = self._solve("integer", k, system)
        t = k * dt
        return replace(
            state,
            u2_int=Field(D, u2n, t),
            w1_int=Field(C, w1n, t),
            P3=Field(S, P3, t - 0.5 * dt),
            k=k,
        )

    def half_integer_step(self, state: SimState) -> SimState:
        """Advance ``u1, w2`` from ``t^{k-1/2}`` to ``t^{k+1/2}``; also yields ``P0`` at ``t^k``."""
        m, dt, ir = self.mats, self.dt, _inv(self.Re)
        k = state.k
        u1, w2, w1 = state.u1_half, state.w2_half, state.w1_int
        R = assemble_rotation_curl(self.disc, w1)
        Md = m.M / dt
        rhs = (Md - 0.5 * R) @ u1.coeffs - 0.5 * ir * (m.Cmat.T @ w2.coeffs)
        rhs = rhs + self.load(C, state.t)
        nD, nG = self.disc.ndofs(D), self.disc.ndofs(G)
        system = LinearSystem(
            blocks=[
                [structural_sum((1.0, Md), (0.5, R)), 0.5 * ir * m.Cmat.T, m.Gmat],
                [m.Cmat, -m.N, None],
                [m.Gmat.T, None, None],
            ],
            rhs=[rhs, np.zeros(nD), np.zeros(nG)],
            layout=("u1", "w2", "P0"),
            mean_weights=self.mean_G,
        )
        u1n, w2n, P0 = self._solve("half-integer", k, system)
        th = state.t + 0.5 * dt
        return replace(
            state,
            u1_half=Field(C, u1n, th),
            w2_half=Field(D, w2n, th),
            P0=Field(G, P0, state.t),
            w2_int=midpoint(w2, Field(D, w2n, th)),
        )

    def curl_identity_residual(self, state: SimState) -> float:
        """``max|w2 - E_curl u1|`` at the current half-integer instant."""
        return float(np.max(np.abs(state.w2_half.coeffs - self.E_curl @ state.u1_half.coeffs)))


def n_steps(t_end: float, dt: float) -> int:
    n = t_end / dt
    steps = int(round(n))
    if abs(n - steps) > 1e-9 * max(1.0, n):
        raise ValueError(f"t_end={t_end} is not a whole number of steps dt={dt}")
    return steps


@dataclass
class RunResult:
    records: list
    state: SimState
    stepper: DualFieldStepper
    initial: SimState

    @property
    def disc(self) -> Discretization:
        return self.stepper.disc


class _Ledger:
    """Builds one DiagnosticsRecord per integer instant from consecutive snapshots."""

    def __init__(self, stepper: DualFieldStepper, div_samples: int = 5):
        self.s = stepper
        self.div_samples = div_samples
        self.prev = None  # (record, w2 at the previous integer instant)

    def _quantities(self, u1_int, w1, u2, w2_int):
        from . import diagnostics as dg

        m = self.s.mats
        return dict(
            H1=dg.helicity(u1_int, w1, m.M),
            H2=dg.helicity(u2, w2_int, m.N),
            E1=dg.enstrophy(w1, m.M),
            E2=dg.enstrophy(w2_int, m.N),
            dual_diff_u=dg.dual_difference(self.s.disc, u1_int, u2),
            dual_diff_w=dg.dual_difference(self.s.disc, w1, w2_int),
        )

    def initial(self, init: SimState, after_bootstrap: SimState | None):
        from . import diagnostics as dg

        disc, m = self.s.disc, self.s.mats
        u1_half = after_bootstrap.u1_half if after_bootstrap is not None else init.u1_half
        rec = dg.DiagnosticsRecord(
            t=init.t,
            t_half=u1_half.time_tag,
            K1=dg.kinetic_energy(u1_half, m.M),
            K2=dg.kinetic_energy(init.u2_int, m.N),
            div_u2_linf=dg.divergence_linf(disc, init.u2_int, self.div_samples),
            div_u1_linf=dg.divergence_linf(disc, u1_half, self.div_samples),
            volume=disc.mesh.volume,
            **self._quantities(init.u1_half, init.w1_int, init.u2_int, init.w2_half),
        )
        self.prev = (rec, init.w2_half)
        return rec

    def step(self, before: SimState, after: SimState):
        """``before``: state after step k-1; ``after``: after S_k and the half step that follows."""
        from . import diagnostics as dg

        disc, m, dt, Re = self.s.disc, self.s.mats, self.s.dt, self.s.Re
        prev_rec, w2_prev_int = self.prev
        u1_int = midpoint(before.u1_half, after.u1_half)
        w2_int = after.w2_int
        q = self._quantities(u1_int, after.w1_int, after.u2_int, w2_int)
        K1 = dg.kinetic_energy(after.u1_half, m.M)
        K2 = dg.kinetic_energy(after.u2_int, m.N)
        ir = _inv(Re)
        w1_mid = midpoint(before.w1_int, after.w1_int)
        rate = dg.helicity_dissipation_rate(
            m.Cmat, Re, before.w1_int, after.w1_int, w2_prev_int, before.w2_half, w2_int
        )
        rec = dg.DiagnosticsRecord(
            t=after.t,
            t_half=after.u1_half.time_tag,
            K1=K1,
            K2=K2,
            div_u2_linf=dg.divergence_linf(disc, after.u2_int, self.div_samples),
            div_u1_linf=dg.divergence_linf(disc, after.u1_half, self.div_samples),
            helicity_rate=rate,
            residual_K2=(K2 - prev_rec.K2) / dt + 2.0 * ir * dg.enstrophy(w1_mid, m.M),
            residual_K1=(K1 - prev_rec.K1) / dt + 2.0 * ir * q["E2"],
            residual_H=(q["H1"] - prev_rec.H1) / dt - rate,
            volume=disc.mesh.volume,
            **q,
        )
        self.prev = (rec, w2_int)
        return rec


def march(stepper: DualFieldStepper, u0: Callable | None, t_end: float, diag_every: int = 1,
          div_samples: int = 5, on_step: Callable | None = None,
          resume: tuple | None = None) -> RunResult:
    """Bootstrap, then ``S_1, S^_1, S_2, ...`` until ``t_end``; one record per integer instant.

    ``resume = (state, previous_record)`` continues a checkpointed run instead
    of starting from ``u0``; the returned records then cover only the new steps.
    """
    n = n_steps(t_end, stepper.dt)
    ledger = _Ledger(stepper, div_samples)
    if resume is not None:
        state, prev_rec = resume
        if state.w2_int is None or not state.bootstrapped:
            raise ValueError("can only resume from a state that has taken the bootstrap step")
        ledger.prev = (prev_rec, state.w2_int)
        init, records = state, []
    else:
        init = stepper.initial_state(u0)
        if n == 0:
            return RunResult([ledger.initial(init, None)], init, stepper, init)
        state = stepper.bootstrap_step(init)
        records = [ledger.initial(init, state)]
        if on_step is not None:
            on_step(state, records[-1])
    while state.k < n:
        before = state
        state = stepper.integer_step(state)
        state = stepper.half_integer_step(state)
        rec = ledger.step(before, state)
        if state.k % diag_every == 0 or state.k == n:
            records.append(rec)
            log.info("t=%.4f K1=%.12g K2=%.12g H1=%.12g H2=%.12g", rec.t, rec.K1, rec.K2, rec.H1, rec.H2)
        if on_step is not None:
            on_step(state, rec)
    return RunResult(records, state, stepper, init)


def run(config, on_step: Callable | None = None) -> RunResult:
    """Run the case named in a :class:`~dualfield.config.RunConfig`."""
    from .cases import get_case

    case = get_case(config.case)
    u0 = get_case(config.initial).u0 if config.initial else case.u0
    disc = Discretization.build(config.K, config.N, case.box_min, case.box_max)
    stepper = DualFieldStepper(disc, config.dt, config.Re, case.body_force(config.Re), config.solver)
    return march(stepper, u0, config.t_end, config.diag_every, config.div_samples, on_step)
