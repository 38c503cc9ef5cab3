"""Conserved and dissipated quantities, error norms and energy spectra."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .basis import gauss_rule
from .spaces import C, D, G, S, Discretization, Field, midpoint


def kinetic_energy(u: Field, mass) -> float:
    return 0.5 * float(u.coeffs @ (mass @ u.coeffs))


def helicity(u: Field, w: Field, mass) -> float:
    if u.kind is not w.kind:
        raise ValueError("helicity pairs a velocity and a vorticity of the same space")
    return float(u.coeffs @ (mass @ w.coeffs))


def enstrophy(w: Field, mass) -> float:
    return 0.5 * float(w.coeffs @ (mass @ w.coeffs))


def helicity_dissipation_rate(Cmat, Re: float, w1_prev: Field, w1: Field, w2_prev: Field, w2_half: Field, w2: Field) -> float:
    """Rate at which viscosity changes both discrete helicities over one integer step.

    ``w1_prev, w1`` are the C vorticities at ``t^{k-1}, t^k``; ``w2_prev, w2``
    the D vorticities at those integer instants (midpoint averages) and
    ``w2_half`` the solved one at ``t^{k-1/2}``. ``<curl a, b> = b^T Cmat a``.
    """
    if math.isinf(Re):
        return 0.0
    w1_mid = 0.5 * (w1_prev.coeffs + w1.coeffs)
    term_half = w2_half.coeffs @ (Cmat @ w1_mid)
    term_ends = w2.coeffs @ (Cmat @ w1.coeffs) + w2_prev.coeffs @ (Cmat @ w1_prev.coeffs)
    return float(-term_half / Re - term_ends / (2.0 * Re))


def _uniform_ref(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n)


def divergence_linf(disc: Discretization, u: Field, samples: int = 5) -> float:
    """Max ``|div u|`` over a ``samples**3`` lattice in every element.

    D fields map exactly to ``E_div u`` in S; C fields are differentiated inside
    each element with no inter-element jump terms.
    """
    r = _uniform_ref(samples)
    if u.kind is D:
        s = Field(S, disc.incidence.as_float.E_div @ u.coeffs, u.time_tag)
        return float(np.max(np.abs(disc.element_values(s, r))))
    if u.kind is C:
        div = sum(disc.element_values(u, r, deriv_axis=a)[a] for a in range(3))
        return float(np.max(np.abs(div)))
    raise ValueError(f"divergence of a {u.kind.value} field is not defined")


def _error_rule(disc: Discretization, nq: Optional[int]):
    rule = gauss_rule(nq or disc.N + 4)
    w = np.einsum("k,j,i->kji", rule.weights, rule.weights, rule.weights).ravel() * disc.jacobian
    return rule.nodes, w


def l2_norm(disc: Discretization, f: Field, nq: int | None = None) -> float:
    r, w = _error_rule(disc, nq)
    v = disc.element_values(f, r)
    return float(np.sqrt(np.sum(v**2 * w)))


def l2_error(disc: Discretization, f: Field, exact, t: float | None = None, nq: int | None = None, mean_free: bool = False) -> float:
    """``||f - exact(., t)||_L2`` by Gauss quadrature inside each element.

    With ``mean_free`` both sides have their means removed first, which is how
    pressures (determined up to a constant) are compared.
    """
    t = f.time_tag if t is None else t
    r, w = _error_rule(disc, nq)
    v = disc.element_values(f, r)
    x, y, z = disc.element_points(r)
    ex = exact(x, y, z, t)
    ex = np.stack([np.broadcast_to(c, x.shape) for c in ex]) if f.is_vector else np.broadcast_to(ex, x.shape)[None]
    diff = v - ex
    if mean_free:
        vol = disc.mesh.volume
        diff = diff - (np.sum(diff * w, axis=(1, 2)) / vol)[:, None, None]
    return float(np.sqrt(np.sum(diff**2 * w)))


def dual_difference(disc: Discretization, f1: Field, f2: Field, nq: int | None = None) -> float:
    """``||f1 - f2||_L2`` between a C and a D representation of the same quantity."""
    if f1.is_vector != f2.is_vector:
        raise ValueError("dual difference needs two vector or two scalar fields")
    r, w = _error_rule(disc, nq)
    diff = disc.element_values(f1, r) - disc.element_values(f2, r)
    return float(np.sqrt(np.sum(diff**2 * w)))


def sample_uniform(disc: Discretization, f: Field, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Values of ``f`` on the uniform periodic lattice ``box_min + i L / n``.

    Returns ``(points, values)`` with points ``(n**3, 3)`` in x-fastest order.
    """
    axes = [disc.mesh.box_min[a] + np.arange(n) * disc.mesh.lengths[a] / n for a in range(3)]
    Z, Y, X = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    vals = np.concatenate([disc.eval_field(f, chunk) for chunk in np.array_split(pts, max(1, len(pts) // 65536))])
    return pts, vals


class SpectrumError(ValueError):
    pass


def spectrum_from_samples(vals: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Shell-binned ``(k, E(k))`` of a vector field sampled on an ``n**3`` lattice.

    Wavenumbers are integer mode numbers (multiples of the fundamental
    ``2 pi / L``) binned by ``round(|kappa|)``; ``sum E(k)`` equals the lattice
    average of ``|u|^2 / 2`` (the volume-normalized kinetic energy).
    """
    u = vals.reshape(n, n, n, 3)
    uh = np.fft.fftn(u, axes=(0, 1, 2)) / n**3
    e = 0.5 * np.sum(np.abs(uh) ** 2, axis=-1)
    m = np.fft.fftfreq(n, 1.0 / n)
    kz, ky, kx = np.meshgrid(m, m, m, indexing="ij")
    shell = np.rint(np.sqrt(kx**2 + ky**2 + kz**2)).astype(int)
    E = np.bincount(shell.ravel(), weights=e.ravel())
    return np.arange(len(E)), E


def energy_spectrum(disc: Discretization, u: Field, sample_n: int) -> tuple[np.ndarray, np.ndarray]:
    if not u.is_vector:
        raise SpectrumError("energy spectrum needs a velocity field")
    need = 2 * disc.mesh.K * disc.N
    if sample_n < need:
        raise SpectrumError(
            f"sample_n={sample_n} under-resolves a K={disc.mesh.K}, N={disc.N} field; use at least {need}"
        )
    _, vals = sample_uniform(disc, u, sample_n)
    return spectrum_from_samples(vals, sample_n)


@dataclass
class DiagnosticsRecord:
    """One row of the per-step conserved-quantity ledger.

    ``K1`` is the energy of ``u1`` at ``t_half`` (the latest half-integer
    instant, or ``t`` when no step was taken); everything else refers to the
    integer instant ``t``, with midpoint averages standing in for the field
    that is only known at half-integer instants.
    """

    t: float
    t_half: float
    K1: float
    K2: float
    H1: float
    H2: float
    E1: float
    E2: float
    div_u2_linf: float
    div_u1_linf: float
    helicity_rate: float = 0.0
    residual_K2: float = 0.0
    residual_K1: float = 0.0
    residual_H: float = 0.0
    volume: float = 1.0
    dual_diff_u: Optional[float] = None
    dual_diff_w: Optional[float] = None

    def __post_init__(self):
        for name in ("K1", "K2", "H1", "H2", "E1", "E2", "div_u2_linf", "div_u1_linf"):
            if not np.isfinite(getattr(self, name)):
                raise FloatingPointError(f"non-finite {name} at t={self.t}")

    @property
    def energy_rate_residuals(self) -> tuple[float, float]:
        return self.residual_K2, self.residual_K1

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop("volume")
        for k in ("K1", "K2", "E1", "E2"):
            row[f"{k}_vol"] = getattr(self, k) / self.volume
        return row

    @classmethod
    def columns(cls) -> list[str]:
        names = [f.name for f in fields(cls) if f.name != "volume"]
        return names + [f"{k}_vol" for k in ("K1", "K2", "E1", "E2")]
