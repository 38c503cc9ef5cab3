"""Periodic hexahedral mesh, DOF maps and incidence matrices.

Global numbering follows the GLL lattice of the whole box. With ``n = K*N``
lattice nodes per axis (periodic, so node ``n`` is node ``0``) and ``n`` lattice
edges per axis (edge ``m`` runs from node ``m`` to node ``m + 1``), every
vector space is three blocks, one per component, and inside a block the
entity index is lexicographic in ``(z, y, x)`` with ``x`` fastest::

    global = component * n**3 + ix + n * (iy + n * iz)

All edges and faces are oriented along the positive axes, so every
orientation sign in the local-to-global maps is ``+1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class SpaceKind(enum.Enum):
    G = "G"  # H1: point values
    C = "C"  # H(curl): edge circulations
    D = "D"  # H(div): face fluxes
    S = "S"  # L2: volume integrals


NODE, EDGE = 0, 1

# per component, whether each axis (x, y, z) carries a nodal or an edge factor
COMPONENT_AXES = {
    SpaceKind.G: ((NODE, NODE, NODE),),
    SpaceKind.C: ((EDGE, NODE, NODE), (NODE, EDGE, NODE), (NODE, NODE, EDGE)),
    SpaceKind.D: ((NODE, EDGE, EDGE), (EDGE, NODE, EDGE), (EDGE, EDGE, NODE)),
    SpaceKind.S: ((EDGE, EDGE, EDGE),),
}


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicMesh:
    K: int
    box_min: np.ndarray
    box_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "box_min", np.asarray(self.box_min, dtype=float).reshape(3))
        object.__setattr__(self, "box_max", np.asarray(self.box_max, dtype=float).reshape(3))

    @property
    def h(self) -> np.ndarray:
        return (self.box_max - self.box_min) / self.K

    @property
    def lengths(self) -> np.ndarray:
        return self.box_max - self.box_min

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def n_elements(self) -> int:
        return self.K**3

    def element_index(self, ex, ey, ez):
        K = self.K
        return np.mod(ex, K) + K * (np.mod(ey, K) + K * np.mod(ez, K))

    def element_coords(self, e):
        K = self.K
        e = np.asarray(e)
        return e % K, (e // K) % K, e // (K * K)

    def element_volumes(self) -> np.ndarray:
        return np.full(self.n_elements, float(np.prod(self.h)))

    def element_origin(self, e) -> np.ndarray:
        ex, ey, ez = self.element_coords(e)
        return self.box_min + np.stack([ex, ey, ez], axis=-1) * self.h

    def neighbors(self, e) -> tuple[int, ...]:
        """Indices of the six face neighbours (-x, +x, -y, +y, -z, +z)."""
        ex, ey, ez = self.element_coords(e)
        return tuple(
            int(self.element_index(ex + dx, ey + dy, ez + dz))
            for dx, dy, dz in ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))
        )

    def wrap(self, points) -> np.ndarray:
        """Map points into the fundamental box ``[box_min, box_max)``."""
        p = np.asarray(points, dtype=float)
        return self.box_min + np.mod(p - self.box_min, self.lengths)


def build_mesh(K: int, box_min=(0.0, 0.0, 0.0), box_max=(1.0, 1.0, 1.0)) -> PeriodicMesh:
    if int(K) != K or K < 1:
        raise MeshError(f"cells per axis must be a positive integer, got {K!r}")
    lo = np.asarray(box_min, dtype=float).reshape(3)
    hi = np.asarray(box_max, dtype=float).reshape(3)
    if np.any(hi <= lo) or not np.all(np.isfinite(hi - lo)):
        raise MeshError(f"degenerate box {lo} .. {hi}")
    return PeriodicMesh(int(K), lo, hi)


def _local_axis_map(K: int, N: int, kind: int) -> np.ndarray:
    """``(K, n_local)`` global 1D lattice index of each local node/edge of each element."""
    e = np.arange(K)[:, None]
    if kind == NODE:
        return (e * N + np.arange(N + 1)[None, :]) % (K * N)
    return e * N + np.arange(N)[None, :]


@dataclass(frozen=True)
class DofMap:
    kind: SpaceKind
    degree: int
    K: int
    global_count: int
    local_to_global: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    block_sizes: tuple = ()

    @property
    def n_local(self) -> int:
        return self.local_to_global.shape[1]

    @property
    def components(self):
        return COMPONENT_AXES[self.kind]

    @property
    def lattice_n(self) -> int:
        return self.K * self.degree


def build_dof_map(mesh: PeriodicMesh, kind: SpaceKind, N: int) -> DofMap:
    if int(N) != N or N < 1:
        raise ValueError(f"polynomial degree must be a positive integer, got {N!r}")
    K = mesh.K
    n = K * N
    ex, ey, ez = mesh.element_coords(np.arange(mesh.n_elements))
    blocks, sizes = [], []
    for comp, axes in enumerate(COMPONENT_AXES[kind]):
        mx, my, mz = (_local_axis_map(K, N, a) for a in axes)
        # local ordering inside a block: x fastest
        gx = mx[ex][:, None, None, :]
        gy = my[ey][:, None, :, None]
        gz = mz[ez][:, :, None, None]
        g = comp * n**3 + gx + n * (gy + n * gz)
        blocks.append(g.reshape(mesh.n_elements, -1))
        sizes.append(blocks[-1].shape[1])
    l2g = np.concatenate(blocks, axis=1)
    count = len(COMPONENT_AXES[kind]) * n**3
    l2g.setflags(write=False)
    return DofMap(kind, N, K, count, l2g, np.ones_like(l2g, dtype=np.int8), tuple(sizes))


def periodic_difference(n: int) -> sp.csr_matrix:
    """1D periodic incidence: edge ``m`` = node ``m + 1`` minus node ``m``."""
    m = np.arange(n)
    rows = np.concatenate([m, m])
    cols = np.concatenate([m, (m + 1) % n])
    vals = np.concatenate([-np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def axis_operators(n: int):
    """Difference along x, y and z of a lexicographic ``(z, y, x)`` lattice of side ``n``."""
    d = periodic_difference(n)
    eye = sp.identity(n, dtype=np.int64, format="csr")
    dx = sp.kron(eye, sp.kron(eye, d))
    dy = sp.kron(eye, sp.kron(d, eye))
    dz = sp.kron(d, sp.kron(eye, eye))
    return [op.tocsr() for op in (dx, dy, dz)]


@dataclass(frozen=True)
class IncidenceSet:
    E_grad: sp.csr_matrix
    E_curl: sp.csr_matrix
    E_div: sp.csr_matrix

    @cached_property
    def as_float(self):
        return IncidenceSet(*(m.astype(float) for m in (self.E_grad, self.E_curl, self.E_div)))


def build_incidence(mesh: PeriodicMesh, dofmaps: dict) -> IncidenceSet:
    degrees = {dm.degree for dm in dofmaps.values()}
    if len(degrees) != 1:
        raise ValueError(f"dof maps were built with different degrees: {sorted(degrees)}")
    n = mesh.K * degrees.pop()
    dx, dy, dz = axis_operators(n)
    E_grad = sp.vstack([dx, dy, dz])
    E_curl = sp.bmat([[None, -dz, dy], [dz, None, -dx], [-dy, dx, None]])
    E_div = sp.hstack([dx, dy, dz])
    # periodic wrap of a single lattice cell can cancel entries; keep the pattern clean
    mats = []
    for m in (E_grad, E_curl, E_div):
        m = sp.csr_matrix(m, dtype=np.int64)
        m.eliminate_zeros()
        mats.append(m)
    return IncidenceSet(*mats)
