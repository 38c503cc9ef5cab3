"""Discrete spaces G, C, D, S on a periodic mesh: fields, evaluation, reduction.

A :class:`Discretization` bundles the mesh, the degree, the four DOF maps and
the incidence matrices. Every basis function is a tensor product of 1D nodal
or edge polynomials (see ``mesh.COMPONENT_AXES``); edge factors carry the
``1/s`` physical scaling (``s = h/2``) so that DOFs are physical line, face and
volume integrals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .basis import edge_basis, gauss_rule, gll_rule, nodal_basis
from .mesh import (
    COMPONENT_AXES,
    EDGE,
    NODE,
    DofMap,
    IncidenceSet,
    PeriodicMesh,
    SpaceKind,
    build_dof_map,
    build_incidence,
    build_mesh,
)

G, C, D, S = SpaceKind.G, SpaceKind.C, SpaceKind.D, SpaceKind.S


@dataclass
class Field:
    kind: SpaceKind
    coeffs: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if not np.all(np.isfinite(self.coeffs)):
            raise FloatingPointError(f"non-finite coefficients in {self.kind.value} field")

    def copy(self, time_tag=None) -> "Field":
        return Field(self.kind, self.coeffs.copy(), self.time_tag if time_tag is None else time_tag)

    @property
    def is_vector(self) -> bool:
        return self.kind in (C, D)


def midpoint(a: Field, b: Field) -> Field:
    """Average of two snapshots of the same space (the midpoint rule in time)."""
    if a.kind is not b.kind:
        raise ValueError(f"cannot average {a.kind} with {b.kind}")
    return Field(a.kind, 0.5 * (a.coeffs + b.coeffs), 0.5 * (a.time_tag + b.time_tag))


def _axis_table(N: int, which: int, r: np.ndarray, scale: float, deriv: int) -> np.ndarray:
    """1D table ``(n_funcs, len(r))`` on reference coords, scaled to physical space."""
    if which == NODE:
        t = nodal_basis(N)(r, deriv)
    else:
        t = edge_basis(N)(r, deriv) / scale
    return t / scale**deriv


class Discretization:
    """Mesh + degree + DOF maps + incidence + the inner-product quadrature."""

    def __init__(self, mesh: PeriodicMesh, N: int, quad_points: int | None = None):
        self.mesh = mesh
        self.N = int(N)
        self.dofmaps = {k: build_dof_map(mesh, k, self.N) for k in SpaceKind}
        self.incidence: IncidenceSet = build_incidence(mesh, self.dofmaps)
        # GLL with N+2 points: exact to degree 2N+1, so all mass matrices are exact
        self.quad = gll_rule((quad_points or self.N + 2) - 1)
        self.scale = 0.5 * mesh.h

    @classmethod
    def build(cls, K: int, N: int, box_min=(0, 0, 0), box_max=(1, 1, 1), **kw) -> "Discretization":
        return cls(build_mesh(K, box_min, box_max), N, **kw)

    def __repr__(self):
        return f"Discretization(K={self.mesh.K}, N={self.N}, box={self.mesh.box_min}..{self.mesh.box_max})"

    def ndofs(self, kind: SpaceKind) -> int:
        return self.dofmaps[kind].global_count

    @property
    def lattice_n(self) -> int:
        return self.mesh.K * self.N

    @property
    def jacobian(self) -> float:
        return float(np.prod(self.scale))

    # -- tabulation ---------------------------------------------------------
    def tabulate(self, kind: SpaceKind, comp: int, r, deriv_axis: int | None = None) -> np.ndarray:
        """Local basis of one component on the tensor grid ``r x r x r`` (x fastest).

        Returns ``(n_local_comp, len(r)**3)``; with ``deriv_axis`` the physical
        partial derivative along that axis is tabulated instead.
        """
        return _tabulate(self.N, kind, comp, tuple(np.asarray(r, float)), tuple(self.scale), deriv_axis)

    @cached_property
    def quad_weights(self) -> np.ndarray:
        w = self.quad.weights
        return np.einsum("k,j,i->kji", w, w, w).ravel() * self.jacobian

    def block_slices(self, kind: SpaceKind):
        sizes = self.dofmaps[kind].block_sizes
        starts = np.concatenate([[0], np.cumsum(sizes)])
        return [slice(int(a), int(b)) for a, b in zip(starts[:-1], starts[1:])]

    def local_coeffs(self, f: Field) -> np.ndarray:
        return f.coeffs[self.dofmaps[f.kind].local_to_global]

    def element_values(self, f: Field, r=None, deriv_axis: int | None = None) -> np.ndarray:
        """Field values at the tensor reference points ``r`` of every element.

        Shape ``(n_components, n_elements, len(r)**3)``; ``r`` defaults to the
        inner-product quadrature nodes.
        """
        r = self.quad.nodes if r is None else np.asarray(r, float)
        loc = self.local_coeffs(f)
        out = [
            loc[:, sl] @ self.tabulate(f.kind, c, r, deriv_axis)
            for c, sl in enumerate(self.block_slices(f.kind))
        ]
        return np.stack(out)

    def element_points(self, r=None) -> np.ndarray:
        """Physical coordinates ``(3, n_elements, len(r)**3)`` of per-element reference points."""
        r = self.quad.nodes if r is None else np.asarray(r, float)
        origins = self.mesh.element_origin(np.arange(self.mesh.n_elements))
        rz, ry, rx = np.meshgrid(r, r, r, indexing="ij")
        ref = np.stack([rx.ravel(), ry.ravel(), rz.ravel()])  # (3, nq)
        return origins.T[:, :, None] + ((ref + 1.0) * self.scale[:, None])[:, None, :]

    # -- point evaluation ---------------------------------------------------
    def locate(self, points):
        """Element index and reference coordinates of (wrapped) physical points."""
        p = self.mesh.wrap(np.atleast_2d(np.asarray(points, float)))
        rel = (p - self.mesh.box_min) / self.mesh.h
        idx = np.clip(np.floor(rel).astype(int), 0, self.mesh.K - 1)
        ref = 2.0 * (rel - idx) - 1.0
        e = self.mesh.element_index(idx[:, 0], idx[:, 1], idx[:, 2])
        return e, ref

    def eval_field(self, f: Field, points) -> np.ndarray:
        """Evaluate ``f`` at physical points: ``(n_points,)`` scalars or ``(n_points, 3)`` vectors."""
        pts = np.atleast_2d(np.asarray(points, float))
        e, ref = self.locate(pts)
        loc = self.local_coeffs(f)[e]
        vals = []
        for c, (sl, axes) in enumerate(zip(self.block_slices(f.kind), COMPONENT_AXES[f.kind])):
            tx, ty, tz = (
                _axis_table(self.N, axes[a], ref[:, a], self.scale[a], 0).T for a in range(3)
            )
            cb = loc[:, sl].reshape(len(pts), tz.shape[1], ty.shape[1], tx.shape[1])
            vals.append(np.einsum("pcba,pa,pb,pc->p", cb, tx, ty, tz))
        out = np.stack(vals, axis=-1)
        return out[:, 0] if out.shape[1] == 1 else out

    # -- mimetic reduction --------------------------------------------------
    @cached_property
    def lattice_nodes(self) -> list[np.ndarray]:
        """Per axis, the ``n + 1`` physical GLL lattice coordinates (last = box_max)."""
        x = gll_rule(self.N).nodes
        out = []
        for a in range(3):
            e = np.arange(self.mesh.K)[:, None]
            pts = self.mesh.box_min[a] + (e + 0.5 * (x[None, :-1] + 1.0)) * self.mesh.h[a]
            out.append(np.concatenate([pts.ravel(), [self.mesh.box_max[a]]]))
        return out

    def _reduction_axis(self, axis: int, which: int, nq: int):
        """Sample points on one axis and the ``(n, n_samples)`` weights that reduce them."""
        nodes = self.lattice_nodes[axis]
        n = self.lattice_n
        if which == NODE:
            return nodes[:-1], np.eye(n)
        rule = gauss_rule(nq)
        a, b = nodes[:-1, None], nodes[1:, None]
        pts = 0.5 * (b - a) * rule.nodes[None, :] + 0.5 * (a + b)
        w = 0.5 * (b - a) * rule.weights[None, :]
        A = np.zeros((n, n * nq))
        for m in range(n):
            A[m, m * nq:(m + 1) * nq] = w[m]
        return pts.ravel(), A

    def project(self, func, kind: SpaceKind, t: float = 0.0, nq: int | None = None) -> Field:
        """Mimetic reduction of an analytic field ``func(x, y, z, t)``.

        G takes point values, C edge line integrals, D face fluxes and S cell
        integrals, each with a Gauss rule of ``nq`` points per lattice
        sub-interval. Vector kinds expect ``func`` to return three components.
        """
        nq = nq or max(self.N + 4, 8)
        coeffs = []
        for comp, axes in enumerate(COMPONENT_AXES[kind]):
            (px, Ax), (py, Ay), (pz, Az) = (self._reduction_axis(a, axes[a], nq) for a in range(3))
            vals = func(px[None, None, :], py[None, :, None], pz[:, None, None], t)
            if kind in (C, D):
                vals = vals[comp]
            vals = np.broadcast_to(np.asarray(vals, float), (len(pz), len(py), len(px)))
            c = np.einsum("kz,zyx->kyx", Az, vals)
            c = np.einsum("jy,kyx->kjx", Ay, c)
            c = np.einsum("ix,kjx->kji", Ax, c)
            coeffs.append(c.ravel())
        return Field(kind, np.concatenate(coeffs), t)

    def zeros(self, kind: SpaceKind, t: float = 0.0) -> Field:
        return Field(kind, np.zeros(self.ndofs(kind)), t)


@lru_cache(maxsize=256)
def _tabulate(N, kind, comp, r, scale, deriv_axis):
    r = np.asarray(r)
    axes = COMPONENT_AXES[kind][comp]
    tabs = [
        _axis_table(N, axes[a], r, scale[a], 1 if deriv_axis == a else 0) for a in range(3)
    ]
    tx, ty, tz = tabs
    t = np.einsum("ai,bj,ck->cbakji", tx, ty, tz)
    t = t.reshape(tz.shape[0] * ty.shape[0] * tx.shape[0], -1)
    t.setflags(write=False)
    return t
