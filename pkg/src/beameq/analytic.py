"""
Closed-form reference objects: the Bennett pinch family and residual
evaluators for Liouville's equation and the conformal Bennett system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import NonIntegrable

__all__ = [
    "PinchParams",
    "pinch_potential",
    "pinch_density",
    "pinch_potential_radial",
    "pinch_density_radial",
    "radial_laplacian",
    "radial_plane_integral",
    "liouville_residual",
    "liouville_residual_planar",
    "bennett_system_residual",
]


@dataclass(frozen=True)
class PinchParams:
    k: float = 1.0
    center: tuple = (0.0, 0.0)
    v0: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("pinch scale k must be positive")


def _dist2(p, x):
    x = np.asarray(x, dtype=float)
    return (x[..., 0] - p.center[0]) ** 2 + (x[..., 1] - p.center[1]) ** 2


def pinch_potential(p, x):
    """v = v0 - ln(1 + k^2 |x - x0|^2); ``x`` has trailing dimension 2."""
    out = p.v0 - np.log1p(p.k ** 2 * _dist2(p, x))
    return out if np.ndim(out) else float(out)


def pinch_density(p, weight, x):
    """weight * (k^2/pi) / (1 + k^2 |x - x0|^2)^2, integrates to ``weight``."""
    if not weight > 0:
        raise ValueError("weight must be positive")
    out = weight * p.k ** 2 / math.pi / (1.0 + p.k ** 2 * _dist2(p, x)) ** 2
    return out if np.ndim(out) else float(out)


def pinch_potential_radial(k, r, v0=0.0):
    return v0 - np.log1p((k * np.asarray(r, dtype=float)) ** 2)


def pinch_density_radial(k, weight, r):
    return weight * k ** 2 / math.pi / (1.0 + (k * np.asarray(r, dtype=float)) ** 2) ** 2


def radial_laplacian(r, v):
    """Second-order centred Delta v = v'' + v'/r on a uniform grid with r[0] = 0.

    The origin uses the regular-point limit Delta v(0) = 4 (v1 - v0) / h^2.
    The last node is left as NaN.
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    h = r[1] - r[0]
    if r[0] != 0 or not np.allclose(np.diff(r), h, rtol=1e-9, atol=0):
        raise ValueError("radial_laplacian needs a uniform grid starting at r = 0")
    out = np.full_like(v, np.nan)
    out[0] = 4.0 * (v[1] - v[0]) / h ** 2
    ri = r[1:-1]
    out[1:-1] = ((v[2:] - 2.0 * v[1:-1] + v[:-2]) / h ** 2
                 + (v[2:] - v[:-2]) / (2.0 * h * ri))
    return out


def radial_plane_integral(r, f, tail=True):
    """2 pi int_0^inf r f(r) dr from samples, plus a power-law tail beyond r[-1].

    The tail exponent is the local log-log slope of the last two samples.
    Raises NonIntegrable if that slope does not exceed 2.
    """
    r = np.asarray(r, dtype=float)
    f = np.asarray(f, dtype=float)
    core = 2.0 * math.pi * simpson(r * f, x=r)
    if not tail:
        return float(core)
    if f[-1] <= 0 or f[-2] <= 0:
        return float(core)
    alpha = -math.log(f[-1] / f[-2]) / math.log(r[-1] / r[-2])
    if not alpha > 2:
        raise NonIntegrable(f"tail exponent {alpha:.4g} <= 2")
    return float(core + 2.0 * math.pi * f[-1] * r[-1] ** 2 / (alpha - 2.0))


def liouville_residual(r, v, tail=True):
    """-Delta v - 4 pi e^{2v} / int e^{2v} on a uniform radial grid.

    The normaliser is taken over the plane (sampled part plus power-law
    tail) unless ``tail`` is False, in which case the sampled disk is used.
    Last node is NaN (no stencil).
    """
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    e2v = np.exp(2.0 * v)
    norm = radial_plane_integral(r, e2v, tail=tail)
    if not (norm > 0 and math.isfinite(norm)):
        raise NonIntegrable("int e^{2v} is not finite and positive")
    return -radial_laplacian(r, v) - 4.0 * math.pi * e2v / norm


def _laplacian_2d(values, h):
    out = np.full_like(values, np.nan)
    out[1:-1, 1:-1] = (values[2:, 1:-1] + values[:-2, 1:-1] + values[1:-1, 2:]
                       + values[1:-1, :-2] - 4.0 * values[1:-1, 1:-1]) / h ** 2
    return out


def liouville_residual_planar(field):
    """Planar version on the field's mask; NaN where the 5-point stencil leaves the grid."""
    e2v = np.exp(2.0 * field.values)
    norm = float(np.sum(e2v[field.mask])) * field.h ** 2
    if not (norm > 0 and math.isfinite(norm)):
        raise NonIntegrable("int e^{2v} over the domain is not finite and positive")
    res = -_laplacian_2d(field.values, field.h) - 4.0 * math.pi * e2v / norm
    return field.with_values(np.where(field.mask, res, np.nan))


def bennett_system_residual(config, r, phi, psi):
    """Relative residual of the radial Bennett equations for sampled (phi, psi).

    Returns max over interior nodes of |lhs - rhs| for the two equations,
    both divided by the largest source magnitude of either equation (a
    neutral beam has no charge source). The normalising integrals include a
    power-law tail.
    """
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    src_phi = np.zeros_like(r)
    src_psi = np.zeros_like(r)
    for sp in config.species:
        expo = -sp.beta * sp.charge * (phi - sp.drift * psi)
        expo = expo - expo[0]
        boltz = np.exp(expo)
        rho = sp.line_density * boltz / radial_plane_integral(r, boltz)
        src_phi += 4.0 * math.pi * sp.charge * rho
        src_psi += 4.0 * math.pi * sp.drift * sp.charge * rho
    scale = max(float(np.max(np.abs(src_phi))), float(np.max(np.abs(src_psi))))
    out = []
    for pot, src in ((phi, src_phi), (psi, src_psi)):
        lhs = -radial_laplacian(r, pot)
        out.append(float(np.nanmax(np.abs(lhs - src)[:-1]) / scale))
    return tuple(out)
