"""Sparse direct solves: MKL PARDISO when installed, SuperLU otherwise."""
from __future__ import annotations

import glob
import logging
import os
import sys
from collections import OrderedDict

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

log = logging.getLogger(__name__)

# below this size SuperLU is fast enough and keeps the run free of optional deps
PARDISO_MIN_SIZE = 1000

# 1-based iparm: user values, METIS ordering, refinement steps, pivot
# perturbation 1e-13, scaling, weighted matching
PARDISO_IPARM = {1: 1, 2: 2, 8: 20, 10: 13, 11: 1, 13: 1}
# extra refinement sweeps when the relative residual stays above REFINE_TOL
REFINE_TOL = 1e-12
MAX_REFINE = 5

_pardiso = None


class SolverError(RuntimeError):
    pass


def _load_pardiso():
    global _pardiso
    if _pardiso is not None:
        return _pardiso or None
    if "PYPARDISO_MKL_RT" not in os.environ:
        # the mkl wheel ships libmkl_rt.so.N, which pypardiso does not look for
        for root in (sys.prefix, "/usr/local", "/usr"):
            hits = sorted(glob.glob(os.path.join(root, "lib", "libmkl_rt.so*")))
            if hits:
                os.environ["PYPARDISO_MKL_RT"] = hits[0]
                break
    try:
        _pardiso = _new_pardiso()
    except (ImportError, OSError) as exc:
        log.debug("PARDISO unavailable (%s); using SuperLU", exc)
        _pardiso = False
    return _pardiso or None


def available_backends() -> list[str]:
    return ["superlu"] + (["pardiso"] if _load_pardiso() is not None else [])


def pick_backend(n: int, backend: str = "auto") -> str:
    if backend == "auto":
        return "pardiso" if n >= PARDISO_MIN_SIZE and _load_pardiso() is not None else "superlu"
    if backend == "pardiso" and _load_pardiso() is None:
        raise SolverError("PARDISO requested but pypardiso/MKL could not be loaded")
    if backend not in ("pardiso", "superlu"):
        raise ValueError(f"unknown solver backend {backend!r}")
    return backend


def _new_pardiso():
    import pypardiso

    solver = pypardiso.PyPardisoSolver()
    solver.set_matrix_type(11)
    # MKL defaults (iparm[0] = 0) leave the zero-diagonal saddle blocks
    # badly pivoted; switch on scaling + weighted matching explicitly
    for i, v in PARDISO_IPARM.items():
        solver.set_iparm(i, v)
    return solver


class _PardisoHandle:
    """One PARDISO instance bound to one sparsity pattern.

    The symbolic analysis (about a third of the cost at production sizes) is
    done once; later matrices with the same pattern only refactor numerically.
    """

    def __init__(self, A: sp.csr_matrix):
        self.solver = _new_pardiso()
        self._call(11, A, np.zeros(A.shape[0]))

    def _call(self, phase, A, b):
        self.solver.set_phase(phase)
        return self.solver._call_pardiso(A, b.reshape(-1, 1)).ravel()

    def factor(self, A):
        self._call(22, A, np.zeros(A.shape[0]))

    def solve(self, A, b):
        return self._call(33, A, b)

    def release(self):
        self.solver.set_phase(-1)
        self.solver._call_pardiso(sp.csr_matrix((0, 0)), np.zeros((0, 1)))


# step matrices cycle through a handful of patterns (bootstrap, integer, half-integer)
MAX_PATTERNS = 4
_handles: "OrderedDict[tuple, _PardisoHandle]" = OrderedDict()


def _handle_for(A: sp.csr_matrix) -> _PardisoHandle:
    key = (A.shape, hash(A.indptr.tobytes()), hash(A.indices.tobytes()))
    h = _handles.pop(key, None)
    if h is None:
        h = _PardisoHandle(A)
        while len(_handles) >= MAX_PATTERNS:
            _handles.popitem(last=False)[1].release()
    _handles[key] = h
    return h


def release_pardiso():
    while _handles:
        _handles.popitem()[1].release()


def _pardiso_solve(A, b):
    A = sp.csr_matrix(A, dtype=float)
    A.sort_indices()
    b = np.asarray(b, float)
    h = _handle_for(A)
    h.factor(A)
    x = h.solve(A, b)
    scale = max(np.abs(b).max(), 1e-300)
    for _ in range(MAX_REFINE):
        r = b - A @ x
        if np.abs(r).max() <= REFINE_TOL * scale:
            break
        x = x + h.solve(A, r)
    return x


def solve(A: sp.spmatrix, b: np.ndarray, backend: str = "auto") -> np.ndarray:
    """Solve ``A x = b`` with a fresh sparse LU factorization of ``A``."""
    n = A.shape[0]
    which = pick_backend(n, backend)
    try:
        if which == "pardiso":
            x = _pardiso_solve(A, b)
        else:
            x = sla.splu(sp.csc_matrix(A), permc_spec="COLAMD").solve(np.asarray(b, float))
    except Exception as exc:  # SuperLU raises RuntimeError, pypardiso its own PyPardisoError
        if isinstance(exc, (KeyboardInterrupt, MemoryError)):
            raise
        raise SolverError(f"sparse factorization failed ({which}, n={n}): {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError(f"non-finite solution from {which} (n={n}); matrix is numerically singular")
    return x


def factorized(A: sp.spmatrix):
    """Reusable solve for a matrix applied many times (SuperLU; used for masses)."""
    lu = sla.splu(sp.csc_matrix(A), permc_spec="COLAMD")
    return lu.solve
