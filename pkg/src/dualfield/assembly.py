"""Global sparse matrices and load vectors.

Every matrix is assembled element by element from quadrature on the
``N + 2`` point GLL rule and scattered as coordinate triplets (duplicates are
summed). The mesh is uniform, so the element matrices of the bilinear forms
without coefficients are identical for all elements and are computed once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import IncidenceSet, SpaceKind
from .spaces import C, D, G, S, Discretization, Field

# Levi-Civita symbol
LEVI = np.zeros((3, 3, 3))
LEVI[0, 1, 2] = LEVI[1, 2, 0] = LEVI[2, 0, 1] = 1.0
LEVI[0, 2, 1] = LEVI[2, 1, 0] = LEVI[1, 0, 2] = -1.0


def _scatter(disc: Discretization, test: SpaceKind, trial: SpaceKind, local: np.ndarray) -> sp.csr_matrix:
    """Sum per-element blocks ``local`` (``(n_e, n_i, n_j)`` or one shared ``(n_i, n_j)``)."""
    rows_l2g = disc.dofmaps[test].local_to_global
    cols_l2g = disc.dofmaps[trial].local_to_global
    n_e = rows_l2g.shape[0]
    if local.ndim == 2:
        local = np.broadcast_to(local, (n_e,) + local.shape)
    rows = np.broadcast_to(rows_l2g[:, :, None], local.shape)
    cols = np.broadcast_to(cols_l2g[:, None, :], local.shape)
    m = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())),
        shape=(disc.ndofs(test), disc.ndofs(trial)),
    )
    return m.tocsr()


def structural_sum(*terms) -> sp.csr_matrix:
    """Sum of ``(scale, matrix)`` pairs keeping explicit zeros.

    Plain sparse addition prunes entries that cancel, so matrices built from
    step-dependent values would change sparsity pattern from step to step.
    """
    coos = [sp.coo_matrix(m) for _, m in terms]
    data = np.concatenate([a * m.data for (a, _), m in zip(terms, coos)])
    rows = np.concatenate([m.row for m in coos])
    cols = np.concatenate([m.col for m in coos])
    return sp.coo_matrix((data, (rows, cols)), shape=coos[0].shape).tocsr()


def _local_mass(disc: Discretization, kind: SpaceKind) -> np.ndarray:
    r, w = disc.quad.nodes, disc.quad_weights
    slices = disc.block_slices(kind)
    n = slices[-1].stop
    out = np.zeros((n, n))
    for c, sl in enumerate(slices):
        t = disc.tabulate(kind, c, r)
        out[sl, sl] = (t * w) @ t.T
    return out


def assemble_mass(disc: Discretization, kind: SpaceKind) -> sp.csr_matrix:
    """``M_ij = <phi_j, phi_i>`` for the basis of ``kind``."""
    m = _scatter(disc, kind, kind, _local_mass(disc, kind))
    # symmetric by construction up to summation order; enforce it bitwise
    return ((m + m.T) * 0.5).tocsr()


def _local_derivative(disc: Discretization, test: SpaceKind, trial: SpaceKind, coupling) -> np.ndarray:
    """Local ``<L phi_j, psi_i>`` where ``coupling(i_comp, j_comp)`` lists ``(axis, sign)`` terms."""
    r, w = disc.quad.nodes, disc.quad_weights
    ts, tr = disc.block_slices(test), disc.block_slices(trial)
    out = np.zeros((ts[-1].stop, tr[-1].stop))
    for ci, si in enumerate(ts):
        psi = disc.tabulate(test, ci, r) * w
        for cj, sj in enumerate(tr):
            for axis, sign in coupling(ci, cj):
                out[si, sj] += sign * psi @ disc.tabulate(trial, cj, r, deriv_axis=axis).T
    return out


def assemble_grad(disc: Discretization) -> sp.csr_matrix:
    """``G_ij = <grad gamma_j, tau_i>``."""
    loc = _local_derivative(disc, C, G, lambda ci, cj: [(ci, 1.0)])
    return _scatter(disc, C, G, loc)


def assemble_curl(disc: Discretization) -> sp.csr_matrix:
    """``C_ij = <curl tau_j, sigma_i>``.

    ``curl(phi e_b)_g = eps_{g a b} d_a phi``.
    """
    def coupling(g, b):
        return [(a, LEVI[g, a, b]) for a in range(3) if LEVI[g, a, b] != 0]

    return _scatter(disc, D, C, _local_derivative(disc, D, C, coupling))


def assemble_div(disc: Discretization) -> sp.csr_matrix:
    """``D_ij = <div sigma_j, chi_i>``."""
    loc = _local_derivative(disc, S, D, lambda ci, cj: [(cj, 1.0)])
    return _scatter(disc, S, D, loc)


def assemble_rotation(disc: Discretization, w: Field, kind: SpaceKind) -> sp.csr_matrix:
    """``R_ij = <w x phi_j, phi_i>`` with ``phi`` the basis of ``kind`` (C or D).

    ``(w x phi_j e_b) . phi_i e_a = eps_{b a g} w_g phi_i phi_j``, so only
    off-diagonal component blocks are nonzero and the matrix is skew at the
    level of every quadrature point.
    """
    if kind not in (C, D):
        raise ValueError(f"rotation matrices live on C or D, not {kind}")
    r, wq = disc.quad.nodes, disc.quad_weights
    wv = disc.element_values(w) * wq  # (3, n_e, nq)
    slices = disc.block_slices(kind)
    n_e = disc.mesh.n_elements
    local = np.zeros((n_e, slices[-1].stop, slices[-1].stop))
    tabs = [disc.tabulate(kind, c, r) for c in range(3)]
    for a in range(3):
        for b in range(a + 1, 3):
            g = 3 - a - b
            # block (a, b) carries eps_{b a g}; block (b, a) is its negative transpose
            blk = LEVI[b, a, g] * np.einsum("eq,iq,jq->eij", wv[g], tabs[a], tabs[b], optimize=True)
            local[:, slices[a], slices[b]] = blk
            local[:, slices[b], slices[a]] = -blk.transpose(0, 2, 1)
    return _scatter(disc, kind, kind, local)


def assemble_rotation_div(disc: Discretization, w2: Field) -> sp.csr_matrix:
    if w2.kind is not D:
        raise ValueError("R_half needs the vorticity in D")
    return assemble_rotation(disc, w2, D)


def assemble_rotation_curl(disc: Discretization, w1: Field) -> sp.csr_matrix:
    if w1.kind is not C:
        raise ValueError("R_int needs the vorticity in C")
    return assemble_rotation(disc, w1, C)


def assemble_load(disc: Discretization, f, kind: SpaceKind, t: float = 0.0, quad_points: int | None = None) -> np.ndarray:
    """``b_i = <f(., t), phi_i>`` for an analytic vector field ``f(x, y, z, t)``."""
    if kind not in (C, D):
        raise ValueError(f"body-force loads live on C or D, not {kind}")
    if f is None:
        return np.zeros(disc.ndofs(kind))
    from .basis import gauss_rule

    rule = gauss_rule(quad_points or disc.N + 3)
    r = rule.nodes
    w = np.einsum("k,j,i->kji", rule.weights, rule.weights, rule.weights).ravel() * disc.jacobian
    x, y, z = disc.element_points(r)
    vals = f(x, y, z, t)
    l2g = disc.dofmaps[kind].local_to_global
    out = np.zeros(disc.ndofs(kind))
    for c, sl in enumerate(disc.block_slices(kind)):
        fc = np.broadcast_to(np.asarray(vals[c], float), x.shape)
        loc = (fc * w) @ disc.tabulate(kind, c, r).T
        np.add.at(out, l2g[:, sl], loc)
    return out


@dataclass(frozen=True)
class SystemMatrices:
    """Constant matrices of both saddle-point systems."""

    M: sp.csr_matrix  # C-space mass
    N: sp.csr_matrix  # D-space mass
    M_G: sp.csr_matrix
    M_S: sp.csr_matrix
    Cmat: sp.csr_matrix
    Dmat: sp.csr_matrix
    Gmat: sp.csr_matrix
    incidence: IncidenceSet

    def mass(self, kind: SpaceKind) -> sp.csr_matrix:
        return {C: self.M, D: self.N, G: self.M_G, S: self.M_S}[kind]


def assemble_system(disc: Discretization) -> SystemMatrices:
    return SystemMatrices(
        M=assemble_mass(disc, C),
        N=assemble_mass(disc, D),
        M_G=assemble_mass(disc, G),
        M_S=assemble_mass(disc, S),
        Cmat=assemble_curl(disc),
        Dmat=assemble_div(disc),
        Gmat=assemble_grad(disc),
        incidence=disc.incidence,
    )
