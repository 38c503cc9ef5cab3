"""One-dimensional GLL nodal and edge polynomials and quadrature rules.

The nodal functions ``l_i`` interpolate at the Gauss-Lobatto-Legendre points.
The edge functions ``e_i = -sum_{k<i} l_k'`` histopolate: the integral of
``e_i`` over the j-th sub-interval of the GLL lattice is ``delta_ij``. With
this pair the derivative of a nodal expansion is the edge expansion of the
coefficient differences, which is what makes the 3D tensor-product spaces
form a discrete de Rham complex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as leg
from numpy.polynomial import Legendre


class QuadratureError(RuntimeError):
    """Raised when the GLL nodes cannot be computed to full precision."""


@dataclass(frozen=True)
class Quadrature1D:
    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def integrate(self, f, a: float = -1.0, b: float = 1.0) -> float:
        """Integrate ``f`` over ``[a, b]`` by affine mapping of the rule."""
        x = 0.5 * (b - a) * self.nodes + 0.5 * (a + b)
        return 0.5 * (b - a) * float(np.dot(self.weights, f(x)))


@lru_cache(maxsize=None)
def _gll_cached(N: int) -> tuple[np.ndarray, np.ndarray]:
    PN = Legendre.basis(N)
    # interior nodes are the roots of P_N'; Newton polish on the companion-matrix guess
    interior = PN.deriv().roots().real if N > 1 else np.array([])
    d1, d2 = PN.deriv(), PN.deriv(2)
    for _ in range(100):
        step = d1(interior) / d2(interior)
        interior = interior - step
        if np.all(np.abs(step) < 1e-15):
            break
    else:
        if N > 1 and np.max(np.abs(d1(interior))) > 1e-10:
            raise QuadratureError(f"GLL root-finding did not converge for N={N}")
    x = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    w = 2.0 / (N * (N + 1) * PN(x) ** 2)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gll_rule(N: int) -> Quadrature1D:
    """GLL rule with ``N + 1`` points, exact for polynomials of degree ``2N - 1``."""
    if N < 1:
        raise ValueError(f"GLL degree must be >= 1, got {N}")
    x, w = _gll_cached(N)
    return Quadrature1D(x, w, 2 * N - 1)


def gauss_rule(n: int) -> Quadrature1D:
    """Gauss-Legendre rule with ``n`` points (used for mimetic reduction)."""
    x, w = leg.leggauss(n)
    return Quadrature1D(x, w, 2 * n - 1)


@dataclass(frozen=True)
class NodalBasis1D:
    """Lagrange polynomials through the ``N + 1`` GLL points."""

    N: int
    nodes: np.ndarray = field(init=False, repr=False)
    polys: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"degree must be >= 1, got {self.N}")
        x = gll_rule(self.N).nodes
        polys = []
        for i in range(self.N + 1):
            others = np.delete(x, i)
            p = Legendre.fromroots(others)
            polys.append(p / p(x[i]))
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "polys", tuple(polys))

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        """Values (or derivatives) of all ``N + 1`` functions, shape ``(N + 1, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([p.deriv(deriv)(x) if deriv else p(x) for p in self.polys])


@dataclass(frozen=True)
class EdgeBasis1D:
    """Histopolant edge polynomials ``e_1 .. e_N`` of degree ``N - 1``."""

    N: int
    nodes: np.ndarray = field(init=False, repr=False)
    polys: tuple = field(init=False, repr=False)

    def __post_init__(self):
        nodal = NodalBasis1D(self.N)
        dl = [p.deriv() for p in nodal.polys]
        polys = []
        acc = Legendre([0.0])
        for i in range(1, self.N + 1):
            acc = acc - dl[i - 1]
            polys.append(acc)
        object.__setattr__(self, "nodes", nodal.nodes)
        object.__setattr__(self, "polys", tuple(polys))

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        """Values of all ``N`` edge functions, shape ``(N, len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.array([p.deriv(deriv)(x) if deriv else p(x) for p in self.polys])


@lru_cache(maxsize=None)
def nodal_basis(N: int) -> NodalBasis1D:
    return NodalBasis1D(N)


@lru_cache(maxsize=None)
def edge_basis(N: int) -> EdgeBasis1D:
    return EdgeBasis1D(N)


def eval_nodal(basis: NodalBasis1D, i: int, x, deriv: int = 0):
    if not 0 <= i <= basis.N:
        raise IndexError(f"nodal index {i} out of range 0..{basis.N}")
    p = basis.polys[i]
    return (p.deriv(deriv) if deriv else p)(x)


def eval_edge(basis: EdgeBasis1D, i: int, x, deriv: int = 0):
    # edge functions are numbered 1..N, matching the sub-interval they belong to
    if not 1 <= i <= basis.N:
        raise IndexError(f"edge index {i} out of range 1..{basis.N}")
    p = basis.polys[i - 1]
    return (p.deriv(deriv) if deriv else p)(x)
