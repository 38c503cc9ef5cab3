"""Analytic initial conditions, exact solutions and body forces of the test cases.

Vector fields are callables ``f(x, y, z, t) -> (fx, fy, fz)`` that broadcast
over array arguments; scalar fields return a single array.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


def _vec(*comps):
    shape = np.broadcast_shapes(*(np.shape(c) for c in comps))
    return tuple(np.broadcast_to(np.asarray(c, float), shape) for c in comps)


def constant_field(a, b, c):
    return lambda x, y, z, t=0.0: _vec(a + 0.0 * x, b + 0.0 * y, c + 0.0 * z)


# -- conservation / dissipation test (unit cube) ------------------------------

def beltrami_u(x, y, z, t=0.0):
    return _vec(np.cos(TWO_PI * z), np.sin(TWO_PI * z), np.sin(TWO_PI * x))


def beltrami_omega(x, y, z, t=0.0):
    return _vec(
        -TWO_PI * np.cos(TWO_PI * z),
        -TWO_PI * np.sin(TWO_PI * z) - TWO_PI * np.cos(TWO_PI * x),
        0.0 * x,
    )


# -- manufactured solution for the convergence test (unit cube) ---------------

def mms_u(x, y, z, t=0.0):
    return _vec(
        (2.0 - t) * np.cos(TWO_PI * z),
        (1.0 + t) * np.sin(TWO_PI * z),
        (1.0 - t) * np.sin(TWO_PI * x),
    )


def mms_omega(x, y, z, t=0.0):
    a, b, c = 2.0 - t, 1.0 + t, 1.0 - t
    return _vec(
        -TWO_PI * b * np.cos(TWO_PI * z),
        -TWO_PI * a * np.sin(TWO_PI * z) - TWO_PI * c * np.cos(TWO_PI * x),
        0.0 * y,
    )


def mms_p(x, y, z, t=0.0):
    return np.sin(TWO_PI * (x + y + t)) + 0.0 * z


def mms_total_pressure(x, y, z, t=0.0):
    ux, uy, uz = mms_u(x, y, z, t)
    return mms_p(x, y, z, t) + 0.5 * (ux**2 + uy**2 + uz**2)


def mms_force(Re: float) -> Callable:
    """Body force making ``mms_u``, ``mms_p`` an exact solution of the rotational form.

    ``f = du/dt + w x u + curl(w)/Re + grad(p + |u|^2/2)``, with
    ``curl(w) = 4 pi^2 u`` for this velocity.
    """
    inv_re = 0.0 if np.isinf(Re) else 1.0 / Re

    def f(x, y, z, t=0.0):
        a, b, c = 2.0 - t, 1.0 + t, 1.0 - t
        sx, cx = np.sin(TWO_PI * x), np.cos(TWO_PI * x)
        sz, cz = np.sin(TWO_PI * z), np.cos(TWO_PI * z)
        ux, uy, uz = a * cz, b * sz, c * sx
        wx, wy = -TWO_PI * b * cz, -TWO_PI * a * sz - TWO_PI * c * cx
        dp = TWO_PI * np.cos(TWO_PI * (x + y + t))
        lamb = (wy * uz, -wx * uz, wx * uy - wy * ux)
        dkin = (c * c * TWO_PI * sx * cx, 0.0, (b * b - a * a) * TWO_PI * sz * cz)
        dudt = (-cz, sz, -sx)
        visc = 4.0 * np.pi**2 * inv_re
        return _vec(
            dudt[0] + lamb[0] + visc * ux + dp + dkin[0],
            dudt[1] + lamb[1] + visc * uy + dp + dkin[1] + 0.0 * y,
            dudt[2] + lamb[2] + visc * uz + dkin[2],
        )

    return f


# -- Taylor-Green vortex on [-pi, pi]^3 ----------------------------------------

def tgv_u(x, y, z, t=0.0):
    return _vec(
        np.sin(x) * np.cos(y) * np.cos(z),
        -np.cos(x) * np.sin(y) * np.cos(z),
        0.0 * x,
    )


def tgv_omega(x, y, z, t=0.0):
    return _vec(
        -np.cos(x) * np.sin(y) * np.sin(z),
        -np.sin(x) * np.cos(y) * np.sin(z),
        2.0 * np.sin(x) * np.sin(y) * np.cos(z),
    )


@dataclass(frozen=True)
class Case:
    name: str
    box_min: tuple
    box_max: tuple
    u0: Callable
    force: Optional[Callable[[float], Callable]] = None
    exact_u: Optional[Callable] = None
    exact_omega: Optional[Callable] = None
    exact_P: Optional[Callable] = None
    defaults: dict = field(default_factory=dict)

    def body_force(self, Re: float):
        return None if self.force is None else self.force(Re)


UNIT = ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
PI_BOX = ((-np.pi,) * 3, (np.pi,) * 3)

CASES = {
    "conservation": Case(
        "conservation", *UNIT, beltrami_u,
        defaults=dict(K=3, N=2, dt=1 / 20, t_end=10.0, Re=float("inf")),
    ),
    "dissipation": Case(
        "dissipation", *UNIT, beltrami_u,
        defaults=dict(K=3, N=2, dt=1 / 20, t_end=10.0, Re=100.0),
    ),
    "convergence": Case(
        "convergence", *UNIT, mms_u, force=mms_force,
        exact_u=mms_u, exact_omega=mms_omega, exact_P=mms_total_pressure,
        defaults=dict(K=3, N=2, dt=1 / 50, t_end=2.0, Re=1.0),
    ),
    "tgv": Case(
        "tgv", *PI_BOX, tgv_u,
        defaults=dict(K=8, N=2, dt=1 / 20, t_end=10.0, Re=500.0),
    ),
    "custom": Case(
        "custom", *UNIT, beltrami_u,
        defaults=dict(K=3, N=2, dt=1 / 20, t_end=1.0, Re=float("inf")),
    ),
}


def get_case(name: str) -> Case:
    try:
        return CASES[name]
    except KeyError:
        raise KeyError(f"unknown case {name!r}; choose from {sorted(CASES)}") from None
