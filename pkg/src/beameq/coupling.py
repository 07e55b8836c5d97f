"""
Coupling matrices and the three equivalent field representations.

Species are indexed 0 = plus, 1 = minus. With

    gamma[s][t] = -q_s q_t (1 - nu_s nu_t)

the chemical self-potentials U_s = -q_s (phi - nu_s psi) and the density
potentials u_s (phi = sum q_s u_s, psi = sum nu_s q_s u_s) are related by
U = gamma u.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoupling, NoPositiveSolution

__all__ = [
    "CouplingMatrix",
    "coupling_matrix",
    "to_chemical",
    "to_density_potentials",
    "to_potentials",
    "from_potentials",
    "kappa_matrix",
    "confinement_exponents",
    "conformal_residual",
    "solve_conformal_line_densities",
    "current_and_charge",
    "quadratic_form",
]


def _species(obj):
    if hasattr(obj, "species"):
        return obj.species
    plus, minus = obj
    return plus, minus


@dataclass(frozen=True)
class CouplingMatrix:
    gamma: np.ndarray
    inverse: np.ndarray
    det: float

    def __iter__(self):
        return iter(self.gamma)


def _gamma(q, nu):
    return -np.outer(q, q) * (1.0 - np.outer(nu, nu))


def coupling_matrix(config):
    """Build gamma, its inverse and determinant.

    Raises DegenerateCoupling when nu_plus == nu_minus (rank drops to 1).
    """
    plus, minus = _species(config)
    q = np.array([plus.charge, minus.charge], dtype=float)
    nu = np.array([plus.drift, minus.drift], dtype=float)
    det = -(q[0] * q[1]) ** 2 * (nu[0] - nu[1]) ** 2
    if det == 0:
        raise DegenerateCoupling("equal drift speeds give a rank-1 coupling matrix")
    g = _gamma(q, nu)
    inv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / det
    return CouplingMatrix(gamma=g, inverse=inv, det=float(det))


def _apply(mat, pair):
    a, b = (np.asarray(x, dtype=float) for x in pair)
    return (mat[0, 0] * a + mat[0, 1] * b, mat[1, 0] * a + mat[1, 1] * b)


def to_chemical(u, cm):
    """Density potentials (u+, u-) -> chemical self-potentials (U+, U-)."""
    return _apply(cm.gamma, u)


def to_density_potentials(U, cm):
    """Chemical self-potentials (U+, U-) -> density potentials (u+, u-)."""
    return _apply(cm.inverse, U)


def to_potentials(u, config):
    """(u+, u-) -> (phi, psi) with phi = sum q u, psi = sum nu q u."""
    plus, minus = _species(config)
    m = np.array([[plus.charge, minus.charge],
                  [plus.drift * plus.charge, minus.drift * minus.charge]])
    return _apply(m, u)


def from_potentials(phi, psi, config):
    """(phi, psi) -> (u+, u-); requires nu_plus != nu_minus."""
    plus, minus = _species(config)
    m = np.array([[plus.charge, minus.charge],
                  [plus.drift * plus.charge, minus.drift * minus.charge]])
    det = np.linalg.det(m)
    if det == 0:
        raise DegenerateCoupling("equal drift speeds: (phi, psi) do not determine u")
    inv = np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]) / det
    return _apply(inv, (phi, psi))


def current_and_charge(config, line_densities=None):
    """(I, Q) for the given (or configured) line densities, c = 1."""
    plus, minus = _species(config)
    n = (np.array([plus.line_density, minus.line_density]) if line_densities is None
         else np.asarray(line_densities, dtype=float))
    q = np.array([plus.charge, minus.charge])
    nu = np.array([plus.drift, minus.drift])
    return float(np.sum(q * nu * n)), float(np.sum(q * n))


def quadratic_form(gamma, n):
    """sum_{s,t} gamma[s][t] N_s N_t  (= I^2 - Q^2)."""
    n = np.asarray(n, dtype=float)
    return float(n @ np.asarray(gamma) @ n)


def kappa_matrix(config, cm=None, line_densities=None):
    """kappa[s][t] = beta_s gamma[s][t] N_t (row sums are the confinement exponents)."""
    plus, minus = _species(config)
    cm = cm or coupling_matrix(config)
    n = (np.array([plus.line_density, minus.line_density]) if line_densities is None
         else np.asarray(line_densities, dtype=float))
    beta = np.array([plus.beta, minus.beta])
    return beta[:, None] * cm.gamma * n[None, :]


def confinement_exponents(config, line_densities=None):
    """e_s = beta_s sum_t gamma[s][t] N_t; the density tail decays like r^(-2 e_s)."""
    return kappa_matrix(config, line_densities=line_densities).sum(axis=1)


def conformal_residual(config):
    """beta_s q_s (nu_s I - Q) - 2 for s = plus, minus."""
    plus, minus = _species(config)
    current, charge = current_and_charge(config)
    return np.array([sp.beta * sp.charge * (sp.drift * current - charge) - 2.0
                     for sp in (plus, minus)])


def solve_conformal_line_densities(plus, minus):
    """Line densities (N+, N-) that make the Bennett system conformal.

    The condition is linear in N: gamma N = (2/beta_+, 2/beta_-).

    Raises DegenerateCoupling for equal drifts and NoPositiveSolution when
    a component comes out non-positive.
    """
    cm = coupling_matrix((plus, minus))
    rhs = np.array([2.0 / plus.beta, 2.0 / minus.beta])
    n = cm.inverse @ rhs
    # one step of iterative refinement keeps the residual at round-off level
    n = n + cm.inverse @ (rhs - cm.gamma @ n)
    if np.any(n <= 0):
        raise NoPositiveSolution(
            f"conformal line densities {n.tolist()} are not all positive")
    return float(n[0]), float(n[1])
