"""
Composite workflows shared by the command line and the acceptance suite.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .analytic import liouville_residual, pinch_density_radial, pinch_potential_radial
from .diagnostics import classical_ratio
from .fields import PlanarField
from .radial import (central_w_for_density, central_w_for_fugacity, integrate_profile,
                     solve_equilibrium, species_models)
from .rearrangement import (asymmetry_floor, asymmetry_index, decreasing_rearrangement,
                            level_measure, level_perimeter, ring_area)
from .species import Model

__all__ = [
    "radial_solution",
    "pinch_mismatch",
    "pinch_liouville_check",
    "limit_sweep",
    "random_bumps",
    "rearrangement_suite",
]


def radial_solution(config):
    """Radial equilibrium for any configuration.

    Conformal Bennett configurations are integrated forward from the pinch
    central data at scale k = ``solver.scale_k``; everything else goes
    through the inverse solver.
    """
    if config.model is Model.BENNETT and config.is_conformal:
        k = config.solver.scale_k
        models = species_models(config, [sp.min_energy for sp in config.species])
        w0 = central_w_for_density(config, config.line_densities * k ** 2 / math.pi, models)
        prof = integrate_profile(config, w0)
        return dataclasses.replace(prof, kind="conformal-forward")
    return solve_equilibrium(config)


def pinch_mismatch(profile, r_limit=None):
    """Max relative deviation of the densities from N_s (k^2/pi)(1 + k^2 r^2)^-2 on [0, r_limit].

    k is read off the plus-species central density; ``r_limit`` defaults to 10/k.
    """
    n = profile.config.line_densities
    k = math.sqrt(math.pi * profile.rho[0, 0] / n[0])
    r_limit = 10.0 / k if r_limit is None else r_limit
    sel = profile.r <= r_limit
    worst = 0.0
    for s in range(2):
        exact = pinch_density_radial(k, n[s], profile.r[sel])
        worst = max(worst, float(np.max(np.abs(profile.rho[s, sel] / exact - 1.0))))
    return worst, k


def pinch_liouville_check(k=1.0, h_factor=1e-3, r_limit_factor=1e3):
    """Max |Liouville residual| of the pinch potential on a uniform radial grid.

    Grid spacing h = h_factor / k out to r_limit_factor / k; the normaliser
    includes the analytic power-law tail.
    """
    h = h_factor / k
    r = np.arange(0.0, r_limit_factor / k + 0.5 * h, h)
    res = liouville_residual(r, pinch_potential_radial(k, r))
    return float(np.nanmax(np.abs(res)))


def limit_sweep(config, fugacities=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5), r_compare=10.0):
    """Thomas-Fermi profiles at decreasing central fugacity against Bennett.

    For each fugacity both species start at that central fugacity; the
    Bennett comparison profile has the same central densities. The profile
    mismatch is the max relative density difference over r <= r_compare core
    lengths.
    """
    tf = config.with_model(Model.THOMAS_FERMI)
    bn = config.with_model(Model.BENNETT)
    rows = []
    for z in fugacities:
        p_tf = integrate_profile(tf, central_w_for_fugacity(tf, z))
        p_bn = integrate_profile(bn, central_w_for_density(bn, p_tf.rho[:, 0]))
        tf_cfg = tf.with_line_densities(*p_tf.line_densities)
        p_tf = dataclasses.replace(p_tf, config=tf_cfg)
        ell = math.sqrt(p_tf.line_densities[0] / (math.pi * p_tf.rho[0, 0]))
        sel = p_tf.r <= r_compare * ell
        if p_tf.r.shape != p_bn.r.shape or not np.allclose(p_tf.r, p_bn.r, rtol=1e-12):
            raise RuntimeError("profiles are not on a common grid")
        mismatch = float(np.max(np.abs(p_tf.rho[:, sel] / p_bn.rho[:, sel] - 1.0)))
        ratio = classical_ratio(p_tf)
        rows.append({"fugacity": float(z),
                     "line_densities": [float(x) for x in p_tf.line_densities],
                     "ratio": [float(x) for x in ratio],
                     "ratio_minus_one": [float(x) - 1.0 for x in ratio],
                     "profile_mismatch": mismatch})
    return rows


def random_bumps(rng, n=129, half_width=4.0, bumps=2):
    """Nonnegative field made of ``bumps`` Gaussians at random positions."""
    centers = rng.uniform(-0.5 * half_width, 0.5 * half_width, size=(bumps, 2))
    widths = rng.uniform(0.4, 1.0, size=bumps)
    heights = rng.uniform(0.5, 1.5, size=bumps)

    def values(x, y):
        out = np.zeros_like(x)
        for (cx, cy), w, a in zip(centers, widths, heights):
            out += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * w * w))
        return out

    return PlanarField.disk(half_width, n, values)


def rearrangement_suite(field, thresholds=64):
    """Equimeasurability, mass, idempotence and perimeter checks for one field."""
    star = decreasing_rearrangement(field)
    vals = field.values[field.mask]
    levels = np.linspace(np.min(vals), np.max(vals), thresholds + 2)[1:-1]
    worst_ring = 0.0
    for xi in levels:
        a0 = level_measure(field, xi)
        a1 = level_measure(star, xi)
        ring = ring_area(field, math.sqrt(max(a0, a1) / math.pi))
        worst_ring = max(worst_ring, abs(a0 - a1) / ring)
    mass_err = abs(float(np.sum(star.values[star.mask])) - float(np.sum(vals))) / float(
        np.sum(np.abs(vals)))
    idem = bool(np.array_equal(decreasing_rearrangement(star).values, star.values))
    per_excess = 0.0
    for xi in levels[::8]:
        excess = (level_perimeter(star, xi) - level_perimeter(field, xi)) / (2.0 * math.pi * field.h)
        per_excess = max(per_excess, excess)
    out = {"thresholds": int(thresholds),
           "equimeasurability_rings": worst_ring,
           "mass_error": mass_err,
           "idempotent": idem,
           "perimeter_excess_rings": per_excess}
    if np.all(vals >= 0) and np.sum(vals) > 0:
        out["asymmetry_index"] = asymmetry_index(field)
        out["asymmetry_floor"] = asymmetry_floor(field)
    return out, star
