"""
Two-dimensional equilibria on a disk by damped Picard iteration.

Each sweep evaluates rho_s = G_s(c_s + U_s) on the disk nodes with the
constant c_s chosen so that the node-sum line density equals its target,
then solves -Delta u_s^new = 4 pi rho_s with Dirichlet data and relaxes
u_s <- (1 - omega) u_s + omega u_s^new.

The disk is embedded in a uniform square grid; cut cells use the
Shortley-Weller stencil, so boundary values are taken on the circle itself
and the discretisation is second order.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .coupling import coupling_matrix
from .errors import InnerSolveFailure, NoConvergence
from .fields import PlanarField
from .species import Model, SpeciesModel

__all__ = [
    "DiskPoisson",
    "PlanarSolution",
    "poisson_solve_dirichlet",
    "solve_planar",
    "angular_variation",
    "angular_floor",
    "radial_reference_density",
]

POISSON_RTOL = 1e-10


class DiskPoisson:
    """LU-factorised -Delta on the nodes strictly inside a disk.

    Parameters
    ----------
    radius : float
        Disk radius; the disk is centred at the origin.
    n : int
        Grid points per side of the square [-L, L]^2.
    half_width : float, optional
        L, default ``radius``.
    """

    def __init__(self, radius, n, half_width=None):
        self.radius = float(radius)
        self.n = int(n)
        self.half_width = float(radius if half_width is None else half_width)
        x = np.linspace(-self.half_width, self.half_width, self.n)
        self.h = x[1] - x[0]
        xx, yy = np.meshgrid(x, x)
        h, R = self.h, self.radius
        inside = np.hypot(xx, yy) < R - 1e-9 * h
        idx = np.full(inside.shape, -1)
        idx[inside] = np.arange(np.count_nonzero(inside))
        self.inside = inside
        self.index = idx
        iy, ix = np.nonzero(inside)
        px, py = xx[inside], yy[inside]

        rows, cols, vals = [], [], []
        b_rows, b_coef, b_x, b_y = [], [], [], []
        diag = np.zeros(iy.size)
        for axis in (0, 1):
            along, across = (px, py) if axis == 0 else (py, px)
            reach = np.sqrt(np.maximum(R * R - across * across, 0.0))
            arms = []
            for sign in (1, -1):
                jy = iy + (sign if axis == 1 else 0)
                jx = ix + (sign if axis == 0 else 0)
                nb = idx[np.clip(jy, 0, n - 1), np.clip(jx, 0, n - 1)]
                on_grid = (jy >= 0) & (jy < n) & (jx >= 0) & (jx < n)
                nb = np.where(on_grid, nb, -1)
                # distance to the circle along this arm, in units of h
                theta = np.where(nb >= 0, 1.0, (reach - sign * along) / h)
                theta = np.clip(theta, 1e-12, 1.0)
                arms.append((sign, nb, theta))
            (_, nb_p, tp), (_, nb_m, tm) = arms
            a, b = tm * h, tp * h
            diag += 2.0 / (a * b)
            for (sign, nb, theta), dist in ((arms[0], b), (arms[1], a)):
                coef = 2.0 / ((a + b) * dist)
                ok = nb >= 0
                rows.append(np.nonzero(ok)[0])
                cols.append(nb[ok])
                vals.append(-coef[ok])
                cut = ~ok
                b_rows.append(np.nonzero(cut)[0])
                b_coef.append(coef[cut])
                hit = along[cut] + sign * theta[cut] * h
                if axis == 0:
                    b_x.append(hit)
                    b_y.append(across[cut])
                else:
                    b_x.append(across[cut])
                    b_y.append(hit)
        m = iy.size
        rows.append(np.arange(m))
        cols.append(np.arange(m))
        vals.append(diag)
        self.matrix = sparse.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
        self.lu = splu(self.matrix)
        self.b_rows = np.concatenate(b_rows)
        self.b_coef = np.concatenate(b_coef)
        self.b_x = np.concatenate(b_x)
        self.b_y = np.concatenate(b_y)
        self.xx, self.yy = xx, yy

    def boundary_values(self, boundary, x, y):
        if callable(boundary):
            return np.asarray(boundary(x, y), dtype=float) * np.ones_like(x)
        return np.full_like(x, float(boundary))

    def solve(self, source, boundary=0.0):
        """Full-grid solution of -Delta u = source with u = boundary on the circle.

        Nodes outside the open disk receive the boundary value at their
        radial projection onto the circle.
        """
        rhs = np.asarray(source, dtype=float)[self.inside].copy()
        g = self.boundary_values(boundary, self.b_x, self.b_y)
        np.add.at(rhs, self.b_rows, self.b_coef * g)
        sol = self.lu.solve(rhs)
        res = np.max(np.abs(self.matrix @ sol - rhs))
        scale = max(np.max(np.abs(rhs)), np.max(np.abs(self.matrix @ sol)), 1e-300)
        if not (np.all(np.isfinite(sol)) and res <= POISSON_RTOL * scale):
            raise InnerSolveFailure(f"Poisson residual {res / scale:.3e} above {POISSON_RTOL:g}")
        out = np.empty((self.n, self.n))
        out[self.inside] = sol
        rest = ~self.inside
        rr = np.maximum(np.hypot(self.xx[rest], self.yy[rest]), 1e-300)
        out[rest] = self.boundary_values(boundary, self.radius * self.xx[rest] / rr,
                                         self.radius * self.yy[rest] / rr)
        return out


@functools.lru_cache(maxsize=8)
def _operator(radius, n, half_width):
    return DiskPoisson(radius, n, half_width)


def poisson_solve_dirichlet(source, boundary=0.0):
    """Solve -Delta u = source on the disk of ``source`` with Dirichlet data.

    ``boundary`` is a constant or a callable ``g(x, y)`` evaluated on the
    circle. Raises InnerSolveFailure when the linear residual exceeds 1e-10
    relative.
    """
    if not np.all(np.isfinite(source.values)):
        raise InnerSolveFailure("source has non-finite values")
    if not source.h > 0:
        raise InnerSolveFailure("grid spacing must be positive")
    op = _operator(source.radius, source.n, source.half_width)
    return source.with_values(op.solve(source.values, boundary))


class _DensityTable:
    """Spline of log G_s(w) for fast repeated evaluation on grids (Thomas-Fermi)."""

    def __init__(self, model, lo, hi, points=4097):
        self.model = model
        self.lo, self.hi = lo, hi
        w = np.linspace(lo, hi, points)
        self.spline = CubicSpline(w, np.log(model.density(w)))

    def __call__(self, w):
        if np.min(w) < self.lo or np.max(w) > self.hi:
            return self.model.density(w)
        return np.exp(self.spline(w))


@dataclass(frozen=True)
class PlanarSolution:
    """Converged (or last) Picard iterate on the disk."""

    config: object
    u: tuple
    rho: tuple
    offsets: np.ndarray
    iterations: int
    update_norm: float
    line_densities: np.ndarray
    masses: np.ndarray
    targets: np.ndarray
    history: tuple
    omega: float
    boundary_mode: str

    @property
    def radius(self):
        return self.u[0].radius


def _field_data(models, c, U, mask):
    out = np.zeros_like(U)
    for s in range(2):
        out[s][mask] = models[s](c[s] + U[s][mask])
    return out


def _renormalize(evaluate, U_masked, target, h, beta, model):
    # constant c with sum G(c + U) h^2 = target
    if model is Model.BENNETT:
        base = float(np.sum(evaluate(U_masked))) * h * h
        return math.log(target / base) / beta
    f = lambda c: math.log(float(np.sum(evaluate(c + U_masked))) * h * h / target)
    lo, hi = -1.0 / beta, 1.0 / beta
    for _ in range(200):
        if f(lo) < 0:
            break
        lo -= 2.0 * (hi - lo)
    for _ in range(200):
        if f(hi) > 0:
            break
        hi += 2.0 * (hi - lo)
    return brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)


def radial_reference_density(profile, radii):
    """Radial solution interpolated to arbitrary radii (w splined in r)."""
    r = profile.r
    models = [SpeciesModel(profile.config.model, sp, (w0 - 40.0 / sp.beta, w0))
              for sp, w0 in zip(profile.config.species, profile.central_w)]
    out = []
    for s in range(2):
        w = CubicSpline(r, profile.w[s])(radii)
        out.append(models[s].density(w))
    return np.array(out)


def _reference_u(profile, radii):
    return np.array([CubicSpline(profile.r, profile.u[s])(radii) for s in range(2)])


def solve_planar(config, radius=None, boundary_mode=None, init=None, options=None,
                 reference=None, omega=None):
    """Damped Picard iteration for the two-species system on a disk.

    Parameters
    ----------
    config : BeamConfig
    radius : float, optional
        Disk radius; default ``radius_factor`` times the core length of the
        reference solution.
    boundary_mode : {"radial", "zero"}
        Dirichlet data from the radial solution's trace, or zero.
    init : pair of arrays or "perturbed", optional
        Initial density potentials on the full grid. "perturbed" (the
        default) starts from the radial density with a relative
        ``perturbation`` * cos(mode theta) modulation.
    reference : RadialProfile, optional
        Radial solution; computed when needed and not given.
    omega : float, optional
        Overrides the damping in ``options``; must lie in (0, 1].

    Returns
    -------
    PlanarSolution

    Raises NoConvergence when the damping drops below 1e-4 or ``max_iter``
    is reached, with the update-norm history as trace.
    """
    opts = options or config.planar
    mode = boundary_mode or opts.boundary
    omega = opts.omega if omega is None else float(omega)
    if not 0 < omega <= 1:
        raise NoConvergence(f"invalid damping omega = {omega!r}; must lie in (0, 1]", [])
    if mode not in ("radial", "zero"):
        raise ValueError("boundary_mode must be 'radial' or 'zero'")
    from .radial import solve_equilibrium, solve_equilibrium_conformal, validate_confinement

    report = validate_confinement(config)
    if not report.passed:
        raise NoConvergence("confinement check failed: " + "; ".join(report.messages), [])
    if reference is None and (mode == "radial" or init is None or isinstance(init, str)):
        reference = (solve_equilibrium_conformal(config) if config.is_conformal
                     and config.model is Model.BENNETT else solve_equilibrium(config))
    if radius is None:
        radius = opts.radius
    if radius is None:
        ell = math.sqrt(reference.line_densities[0] / (math.pi * reference.rho[0, 0]))
        radius = opts.radius_factor * ell
    grid = PlanarField.disk(radius, opts.grid)
    h, mask = grid.h, grid.mask
    rr = grid.radii()
    theta = np.arctan2(*grid.coords[::-1])
    gamma = coupling_matrix(config).gamma
    betas = config.betas

    if mode == "radial":
        ref_rho = radial_reference_density(reference, rr[mask])
        targets = ref_rho.sum(axis=1) * h * h
        trace_vals = _reference_u(reference, np.array([radius]))[:, 0]
        boundary = [float(v) for v in trace_vals]
    else:
        targets = config.line_densities.astype(float)
        boundary = [0.0, 0.0]

    if reference is not None:
        w0 = reference.central_w
    else:
        w0 = np.array([sp.min_energy for sp in config.species])
    models = []
    for s, sp in enumerate(config.species):
        mdl = SpeciesModel(config.model, sp, (w0[s] - 40.0 / sp.beta, w0[s] + 5.0 / sp.beta))
        if config.model is Model.BENNETT:
            models.append(lambda w, m=mdl: np.exp(m.log_prefactor + m.beta * w))
        else:
            models.append(_DensityTable(mdl, w0[s] - 60.0 / sp.beta, w0[s] + 10.0 / sp.beta))

    def solve_u(rho):
        return np.array([poisson_solve_dirichlet(
            grid.with_values(4.0 * math.pi * np.where(mask, rho[s], 0.0)), boundary[s]).values
            for s in range(2)])

    if init is None or isinstance(init, str):
        base = radial_reference_density(reference, rr.ravel()).reshape(2, *rr.shape)
        pert = 1.0 + opts.perturbation * np.cos(opts.mode * theta)
        rho_init = base * pert[None]
        rho_init *= (targets / (rho_init[:, mask].sum(axis=1) * h * h))[:, None, None]
        u = solve_u(rho_init)
    else:
        u = np.array([np.asarray(v, dtype=float) for v in init])

    history = []
    best = math.inf
    for it in range(1, opts.max_iter + 1):
        U = np.einsum("st,tij->sij", gamma, u)
        c = np.array([_renormalize(models[s], U[s][mask], targets[s], h, betas[s],
                                   config.model) for s in range(2)])
        rho = _field_data(models, c, U, mask)
        u_new = solve_u(rho)
        delta = float(np.max(np.abs(u_new - u)[:, mask]))
        history.append(delta)
        if not math.isfinite(delta):
            raise NoConvergence("Picard iterate became non-finite", history)
        if delta < opts.tol:
            u = u_new
            break
        if delta > best and it > 3:
            omega *= 0.5
            if omega < 1e-4:
                raise NoConvergence("damping fell below 1e-4", history)
        best = min(best, delta)
        u = (1.0 - omega) * u + omega * u_new
    else:
        raise NoConvergence(f"no convergence in {opts.max_iter} sweeps "
                            f"(last update {history[-1]:.3e})", history)

    U = np.einsum("st,tij->sij", gamma, u)
    c = np.array([_renormalize(models[s], U[s][mask], targets[s], h, betas[s], config.model)
                  for s in range(2)])
    rho = _field_data(models, c, U, mask)
    prim = np.zeros_like(rho)
    for s, sp in enumerate(config.species):
        mdl = SpeciesModel(config.model, sp, (w0[s] - 40.0 / sp.beta, w0[s] + 5.0 / sp.beta))
        prim[s][mask] = mdl.primitive(c[s] + U[s][mask])
    if np.any(rho[:, mask] <= 0):
        raise NoConvergence("non-positive density in the converged iterate", history)
    return PlanarSolution(
        config=config,
        u=tuple(grid.with_values(u[s]) for s in range(2)),
        rho=tuple(grid.with_values(rho[s]) for s in range(2)),
        offsets=c, iterations=it, update_norm=history[-1],
        line_densities=rho[:, mask].sum(axis=1) * h * h,
        masses=prim[:, mask].sum(axis=1) * h * h,
        targets=np.asarray(targets), history=tuple(history), omega=omega,
        boundary_mode=mode)


def _circle_samples(field, center, radii, n_theta):
    th = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    x = center[0] + radii[:, None] * np.cos(th)[None, :]
    y = center[1] + radii[:, None] * np.sin(th)[None, :]
    # fractional indices: column from x, row from y
    col = (x + field.half_width) / field.h
    row = (y + field.half_width) / field.h
    # nearest-node extension keeps the spline prefilter from ringing off the
    # jump at the disk edge
    return map_coordinates(field.extended_values(), [row.ravel(), col.ravel()], order=3,
                           mode="nearest").reshape(radii.size, n_theta)


def _sample_radii(field, center, n_radii):
    reach = min(field.radius, field.half_width) - math.hypot(*center) - 3.0 * field.h
    if not reach > 2.0 * field.h:
        raise ValueError("center too close to the domain edge")
    return np.linspace(field.h, reach, n_radii)


def angular_variation(field, center=(0.0, 0.0), n_radii=64, n_theta=256):
    """Max over sampled circles of std / mean(|f|) along the circle.

    Circles stay three cells inside the domain; values come from cubic
    spline interpolation of the node data.
    """
    radii = _sample_radii(field, center, n_radii)
    vals = _circle_samples(field, center, radii, n_theta)
    mean = np.mean(np.abs(vals), axis=1)
    std = np.std(vals, axis=1)
    return float(np.max(std / np.maximum(mean, 1e-300)))


def angular_floor(field, center=(0.0, 0.0), n_radii=64, n_theta=256):
    """Interpolation floor of :func:`angular_variation` for this field.

    Builds the exactly radial field with the same circumferential means and
    measures its apparent angular variation.
    """
    radii = _sample_radii(field, center, n_radii)
    mean = np.mean(_circle_samples(field, center, radii, n_theta), axis=1)
    xx, yy = field.coords
    rr = np.hypot(xx - center[0], yy - center[1])
    grid_r = np.concatenate([[0.0], radii])
    center_val = _circle_samples(field, center, np.zeros(1), 1)[0]
    grid_v = np.concatenate([center_val, mean])
    radial = CubicSpline(grid_r, grid_v, extrapolate=True)(np.minimum(rr, radii[-1] + 2 * field.h))
    return angular_variation(field.with_values(radial), center, n_radii, n_theta)

