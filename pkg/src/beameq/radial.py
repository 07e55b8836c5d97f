"""
Radial solver for the density-potential form of the beam equations,

    -(1/r) (r u_s')' = 4 pi G_s(w_s),   w_s = w_s(0) + sum_t gamma[s][t] u_t,

in the gauge u_s(0) = 0. Integration runs in t = ln r with the state
(u_s, r u_s', m_s), where r u_s' = -2 N_s(r) counts the particles inside r
and m_s accumulates the primitive integral.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .config import BeamConfig
from .coupling import (confinement_exponents, conformal_residual, coupling_matrix,
                       solve_conformal_line_densities, to_potentials)
from .errors import (BlowUp, DegenerateCoupling, JacobianSingular, NoConvergence,
                     NoPositiveSolution, NotConformal, QuadratureFailure,
                     TailNotAsymptotic)
from .species import Model, SpeciesModel

__all__ = [
    "ConfinementReport",
    "TailFit",
    "RadialProfile",
    "validate_confinement",
    "species_models",
    "integrate_profile",
    "tail_extend",
    "solve_equilibrium",
    "solve_equilibrium_conformal",
    "central_w_for_density",
    "central_w_for_fugacity",
    "ode_defect",
]

log = logging.getLogger(__name__)

R0_FACTOR = 1e-5
BLOWUP_LOG = 30.0
TF_MAX_STEP = 2.0


@dataclass(frozen=True)
class ConfinementReport:
    exponents: np.ndarray
    threshold: float
    passed: bool
    messages: tuple

    def as_dict(self):
        return {"exponents": [float(e) for e in self.exponents],
                "threshold": self.threshold, "passed": self.passed,
                "messages": list(self.messages)}


def validate_confinement(config, line_densities=None, eps=None):
    """Check e_s = beta_s sum_t gamma[s][t] N_t >= 1 + eps for both species.

    The marginal case e_s = 1 is rejected as well (power-law tail too slow
    to truncate reliably).
    """
    eps = config.solver.confinement_eps if eps is None else eps
    e = confinement_exponents(config, line_densities)
    msgs = []
    for name, val in zip(("plus", "minus"), e):
        if abs(val - 1.0) < 1e-12:
            msgs.append(f"{name}: marginal decay, exponent = 1 (MarginalDecay)")
        elif val < 1.0:
            msgs.append(f"{name}: unconfined, exponent {val:.6g} < 1")
        elif val < 1.0 + eps:
            msgs.append(f"{name}: exponent {val:.6g} below policy threshold {1 + eps:g}")
    return ConfinementReport(e, 1.0 + eps, not msgs, tuple(msgs))


@dataclass(frozen=True)
class TailFit:
    alpha: np.ndarray
    amplitude: np.ndarray
    r_cut: float
    window: tuple
    n_tail: np.ndarray
    m_tail: np.ndarray


@dataclass(frozen=True)
class RadialProfile:
    """Sampled radial equilibrium (or trial profile) with tail metadata.

    Arrays of per-species data have shape (2, len(r)), row 0 = plus.
    ``n_core``/``m_core`` are the integrals up to r[-1]; ``line_densities``
    and ``masses`` add the analytic tail.
    """

    config: BeamConfig
    r: np.ndarray
    u: np.ndarray
    du: np.ndarray
    U: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    prim: np.ndarray
    central_w: np.ndarray
    n_core: np.ndarray
    m_core: np.ndarray
    tail: Optional[TailFit] = None
    line_densities: Optional[np.ndarray] = None
    masses: Optional[np.ndarray] = None
    kind: str = "forward"
    iterations: int = 0
    initial_guess: Optional[np.ndarray] = None
    trace: tuple = ()

    @property
    def model(self):
        return self.config.model

    @property
    def r_max(self):
        return float(self.r[-1])

    @property
    def potentials(self):
        return to_potentials(self.u, self.config)

    def scaled_r(self):
        return self.r

    def truncated(self):
        """Same profile with the tail correction dropped (negative control)."""
        return dataclasses.replace(self, tail=None, line_densities=self.n_core.copy(),
                                   masses=self.m_core.copy())

    def restricted(self, r_max):
        """Profile cut at ``r_max`` with tail quantities recomputed."""
        keep = self.r <= r_max
        sub = dataclasses.replace(
            self, r=self.r[keep], u=self.u[:, keep], du=self.du[:, keep],
            U=self.U[:, keep], w=self.w[:, keep], rho=self.rho[:, keep],
            prim=self.prim[:, keep],
            n_core=-0.5 * self.r[keep][-1] * self.du[:, keep][:, -1],
            m_core=None, tail=None, line_densities=None, masses=None)
        return dataclasses.replace(sub, m_core=_plane_integral(sub.r, sub.prim))


def _plane_integral(r, f):
    return np.array([2.0 * math.pi * simpson(r * row, x=r) for row in f])


def species_models(config, central_w):
    opts = config.solver
    return [SpeciesModel(config.model, sp, (w0 - 40.0 / sp.beta, w0), opts.quad_rtol)
            for sp, w0 in zip(config.species, central_w)]


def central_w_for_density(config, rho0, models=None):
    """Central effective potentials giving the central densities ``rho0``."""
    models = models or species_models(config, [sp.min_energy for sp in config.species])
    return np.array([m.invert_density(float(r)) for m, r in zip(models, rho0)])


def central_w_for_fugacity(config, z):
    z = np.broadcast_to(np.asarray(z, dtype=float), (2,))
    return np.array([sp.min_energy + math.log(zz) / sp.beta
                     for sp, zz in zip(config.species, z)])


def _core_length(config, rho0):
    gamma = coupling_matrix(config).gamma
    beta = config.betas
    signed = beta * (gamma @ rho0)
    k2 = 0.5 * math.pi * np.max(signed)
    if not k2 > 0:
        k2 = 0.5 * math.pi * np.max(beta * (np.abs(gamma) @ rho0))
    return 1.0 / math.sqrt(k2)


def integrate_profile(config, central_w, r_max=None, options=None):
    """Forward mode: integrate from central data and report realized line densities.

    Parameters
    ----------
    config : BeamConfig
    central_w : pair of float
        w_s(0) = mu_s + U_s(0) for (plus, minus).
    r_max : float, optional
        Outer radius; defaults to ``options.r_max`` or ``r_max_factor`` core lengths.

    Raises BlowUp when a density grows far above its central value or the
    integrator fails, and TailNotAsymptotic from the tail fit.
    """
    opts = options or config.solver
    if opts is not config.solver:
        config = dataclasses.replace(config, solver=opts)
    central_w = np.asarray(central_w, dtype=float)
    if not np.all(np.isfinite(central_w)):
        raise BlowUp("central effective potentials must be finite")
    gamma = coupling_matrix(config).gamma
    models = species_models(config, central_w)
    betas = config.betas
    rho0 = np.array([m.density(w) for m, w in zip(models, central_w)])
    g0 = np.array([m.primitive(w) for m, w in zip(models, central_w)])
    ell = _core_length(config, rho0)
    if r_max is None:
        r_max = opts.r_max if opts.r_max is not None else opts.r_max_factor * ell
    r0 = R0_FACTOR * ell
    if not r_max > 10 * r0:
        raise ValueError("r_max too small compared with the core length")

    def rhs(t, y):
        e2t = math.exp(2.0 * t)
        w = central_w + gamma @ y[0:2]
        rho0_, g0_ = models[0].density_and_primitive(w[0])
        rho1_, g1_ = models[1].density_and_primitive(w[1])
        rho = np.array([rho0_, rho1_])
        g = np.array([g0_, g1_])
        return np.concatenate([y[2:4], -4.0 * math.pi * e2t * rho, 2.0 * math.pi * e2t * g])

    def blowup(t, y):
        w = central_w + gamma @ y[0:2]
        return BLOWUP_LOG - np.max(betas * (w - central_w))
    blowup.terminal = True

    # second-order series over the first step: u = -pi rho0 r^2
    y0 = np.concatenate([-math.pi * rho0 * r0 ** 2, -2.0 * math.pi * rho0 * r0 ** 2,
                         math.pi * g0 * r0 ** 2])
    t0, t1 = math.log(r0), math.log(r_max)
    n_dec = (t1 - t0) / math.log(10.0)
    t_eval = np.linspace(t0, t1, max(int(n_dec * opts.points_per_decade), 50) + 1)
    scale = np.concatenate([np.abs(np.maximum(rho0, 1e-300)) * ell ** 2] * 2
                           + [np.maximum(g0, 1e-300) * ell ** 2])
    sol = solve_ivp(rhs, (t0, t1), y0, method="DOP853", t_eval=t_eval,
                    rtol=opts.ode_rtol, atol=1e-3 * opts.ode_rtol * scale,
                    events=blowup)
    if sol.status == 1 or (sol.t_events and sol.t_events[0].size):
        raise BlowUp(f"density grew by e^{BLOWUP_LOG:g} before r = {math.exp(sol.t[-1]):.4g}")
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        raise BlowUp(f"radial integration failed: {sol.message}")

    r = np.concatenate([[0.0], np.exp(sol.t)])
    u = np.concatenate([np.zeros((2, 1)), sol.y[0:2]], axis=1)
    ru = np.concatenate([np.zeros((2, 1)), sol.y[2:4]], axis=1)
    m_int = np.concatenate([np.zeros((2, 1)), sol.y[4:6]], axis=1)
    du = np.zeros_like(ru)
    du[:, 1:] = ru[:, 1:] / r[1:]
    U = gamma @ u
    w = central_w[:, None] + U
    rho = np.vstack([mdl.density(w[i]) for i, mdl in enumerate(models)])
    prim = np.vstack([mdl.primitive(w[i]) for i, mdl in enumerate(models)])
    profile = RadialProfile(config=config, r=r, u=u, du=du, U=U, w=w, rho=rho,
                            prim=prim, central_w=central_w, n_core=-0.5 * ru[:, -1],
                            m_core=m_int[:, -1])
    return tail_extend(profile)


def tail_extend(profile, window=None):
    """Fit rho_s ~ C_s r^-alpha_s on the outer window and add the analytic tails.

    The window is [window * r_max, r_max] (default from the solver options).
    Raises TailNotAsymptotic when alpha_s <= 2 or the log-log slope drifts
    by more than 5 % across the window.
    """
    frac = profile.config.solver.tail_window if window is None else window
    r = profile.r
    r_cut = r[-1]
    sel = (r >= frac * r_cut) & (r > 0)
    if np.count_nonzero(sel) < 5:
        raise TailNotAsymptotic("tail window holds fewer than 5 samples")
    lr = np.log(r[sel])
    alphas, amps, n_tail, m_tail = [], [], [], []
    for s in range(2):
        lrho = np.log(profile.rho[s, sel])
        slope, _ = np.polyfit(lr, lrho, 1)
        alpha = -slope
        half = lr.size // 2
        a_in = -np.polyfit(lr[:half], lrho[:half], 1)[0]
        a_out = -np.polyfit(lr[half:], lrho[half:], 1)[0]
        if not alpha > 2:
            raise TailNotAsymptotic(f"species {s}: tail exponent {alpha:.4g} <= 2")
        if abs(a_in - a_out) > 0.05 * alpha:
            raise TailNotAsymptotic(
                f"species {s}: tail slope drifts from {a_in:.4g} to {a_out:.4g}")
        rho_cut = profile.rho[s, -1]
        amp = rho_cut * r_cut ** alpha
        alphas.append(alpha)
        amps.append(amp)
        n_tail.append(2.0 * math.pi * rho_cut * r_cut ** 2 / (alpha - 2.0))
        m_tail.append(2.0 * math.pi * profile.prim[s, -1] * r_cut ** 2 / (alpha - 2.0))
    tail = TailFit(alpha=np.array(alphas), amplitude=np.array(amps), r_cut=float(r_cut),
                   window=(float(frac * r_cut), float(r_cut)), n_tail=np.array(n_tail),
                   m_tail=np.array(m_tail))
    m_core = profile.m_core
    if m_core is None:
        m_core = _plane_integral(r, profile.prim)
    return dataclasses.replace(profile, tail=tail, m_core=m_core,
                               line_densities=profile.n_core + tail.n_tail,
                               masses=m_core + tail.m_tail)


def ode_defect(profile):
    """Max relative defect of the discretised radial operator on the profile.

    Evaluates (r u')' / r against -4 pi rho with fourth-order centred
    differences in ln r on the interior nodes; returns the max over species
    and nodes of |defect| / (4 pi rho(0)). The value is bounded below by
    the O(dt^4) error of the check itself (about 1e-8 at 200 points per decade).
    """
    r = profile.r[1:]
    t = np.log(r)
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-8):
        raise ValueError("ode_defect needs a profile sampled uniformly in ln r")
    ru = profile.du[:, 1:] * r
    # fourth-order centred derivative in t
    d = (ru[:, :-4] - 8.0 * ru[:, 1:-3] + 8.0 * ru[:, 3:-1] - ru[:, 4:]) / (12.0 * h[0])
    defect = d / r[2:-2] ** 2 + 4.0 * math.pi * profile.rho[:, 3:-2]
    ref = 4.0 * math.pi * profile.rho[:, :1]
    return float(np.max(np.abs(defect) / ref))


def _log_mismatch(profile, target):
    return np.log(profile.line_densities / target)


def solve_equilibrium(config, options=None, initial_w=None):
    """Inverse mode: Newton on the central data until realized N_s match the targets.

    Thomas-Fermi: damped 2-D Newton on (w_+(0), w_-(0)) with a forward
    difference Jacobian. Bennett: the isotropic scaling symmetry makes that
    Jacobian singular for every parameter set, so the scale is pinned
    (central plus density = N_+ k^2 / pi with k = ``scale_k``) and a 1-D
    Newton matches the ratio N_-/N_+; the remaining equation is then the
    Bennett identity, which the targets must satisfy.

    Raises JacobianSingular for conformal Bennett configurations (use
    :func:`solve_equilibrium_conformal`) and NoConvergence otherwise.
    """
    opts = options or config.solver
    if opts is not config.solver:
        config = dataclasses.replace(config, solver=opts)
    report = validate_confinement(config)
    if not report.passed:
        raise NoConvergence("confinement check failed: " + "; ".join(report.messages))
    if config.model is Model.BENNETT:
        return _solve_bennett(config, initial_w)
    return _solve_tf(config, initial_w)


def _scaled_jacobian(config, w, base, target):
    betas = config.betas
    jac = np.zeros((2, 2))
    f0 = _log_mismatch(base, target)
    for t in range(2):
        step = 1e-6 / betas[t]
        w1 = w.copy()
        w1[t] += step
        f1 = _log_mismatch(integrate_profile(config, w1), target)
        jac[:, t] = (f1 - f0) / (step * betas[t])
    return jac, f0


def _solve_tf(config, initial_w):
    opts = config.solver
    target = config.line_densities
    if initial_w is None:
        initial_w = _tf_initial_guess(config)
    w = np.asarray(initial_w, dtype=float).copy()
    trace = []
    prof = integrate_profile(config, w)
    f = _log_mismatch(prof, target)
    for it in range(1, opts.max_iter + 1):
        err = float(np.max(np.abs(f)))
        trace.append({"iteration": it - 1, "central_w": w.tolist(), "log_mismatch": f.tolist()})
        if err < opts.newton_tol:
            return dataclasses.replace(prof, kind="inverse", iterations=it - 1,
                                       initial_guess=np.asarray(initial_w, dtype=float),
                                       trace=tuple(trace))
        jac, _ = _scaled_jacobian(config, w, prof, target)
        if np.linalg.cond(jac) > 1e8:
            raise JacobianSingular(f"Jacobian condition number {np.linalg.cond(jac):.3e} > 1e8")
        step = -np.linalg.solve(jac, f)
        # trust region of TF_MAX_STEP in beta * w
        step *= min(1.0, TF_MAX_STEP / np.max(np.abs(step)))
        step /= config.betas
        lam = opts.damping
        while True:
            try:
                trial = integrate_profile(config, w + lam * step)
                f_trial = _log_mismatch(trial, target)
                if np.max(np.abs(f_trial)) < err or lam < 1e-3:
                    break
            except (BlowUp, TailNotAsymptotic, QuadratureFailure):
                if lam < 1e-3:
                    raise NoConvergence("line search failed", trace) from None
            lam *= 0.5
        w = w + lam * step
        prof, f = trial, f_trial
    raise NoConvergence(f"no convergence in {opts.max_iter} Newton steps", trace)


def _tf_initial_guess(config):
    # unit central fugacity: the degenerate and classical regimes meet here
    return central_w_for_fugacity(config, (1.0, 1.0))


def _solve_bennett(config, initial_w):
    opts = config.solver
    if np.all(np.abs(conformal_residual(config)) < 1e-8):
        raise JacobianSingular(
            "conformal Bennett configuration: the solution family is the pinch at "
            "every scale k; use solve_equilibrium_conformal")
    target = config.line_densities
    betas = config.betas
    k = opts.scale_k
    want = math.log(target[1] / target[0])
    models = species_models(config, [sp.min_energy for sp in config.species])

    # origin of the one-parameter family: the conformal pinch when it exists
    if initial_w is not None:
        origin = np.asarray(initial_w, dtype=float)
    else:
        try:
            n_conf = solve_conformal_line_densities(*config.species)
            origin = central_w_for_density(config, np.asarray(n_conf) * k ** 2 / math.pi, models)
        except (NoPositiveSolution, DegenerateCoupling):
            origin = central_w_for_density(config, target * k ** 2 / math.pi, models)

    trace = []

    def evaluate(d):
        # d shifts beta_- w_-(0); the scale direction shifts both by 2 ln(lambda)
        prof = integrate_profile(config, origin + np.array([0.0, d / betas[1]]))
        n = prof.line_densities
        f = math.log(n[1] / n[0]) - want
        trace.append({"shift": d, "line_densities": n.tolist(), "log_ratio_mismatch": f})
        return prof, f

    def try_eval(d):
        try:
            return evaluate(d)
        except (BlowUp, TailNotAsymptotic) as exc:
            trace.append({"shift": d, "error": str(exc)})
            return None, None

    d0 = 0.0
    prof, f0 = try_eval(d0)
    probe = 0.01
    while prof is None:
        for cand in (probe, -probe):
            prof, f0 = try_eval(cand)
            if prof is not None:
                d0 = cand
                break
        probe *= 2.0
        if probe > 10:
            raise NoConvergence("no confined starting point along the solution family", trace)

    # bracket the root, shrinking the step whenever the family runs into blow-up
    h = 1e-6
    _, fh = evaluate(d0 + h)
    slope = (fh - f0) / h
    if slope == 0:
        raise JacobianSingular("reduced Jacobian vanishes")
    direction = -math.copysign(1.0, f0 * slope)
    lo, flo = d0, f0
    hi = None
    step = min(abs(f0 / slope), 0.05) if f0 != 0 else 0.0
    for _ in range(200):
        if f0 == 0 or hi is not None:
            break
        cand = lo + direction * step
        p_c, f_c = try_eval(cand)
        if p_c is None:
            step *= 0.5
            if step < 1e-14:
                raise NoConvergence("solution family ends before the target ratio", trace)
            continue
        if f_c * flo <= 0:
            hi = cand
        else:
            lo, flo = cand, f_c
            step *= 2.0
    if f0 != 0 and hi is None:
        raise NoConvergence("could not bracket the target ratio", trace)

    # safeguarded Newton (secant fallback to bisection) on the bracket
    best = (prof, f0) if f0 == 0 else None
    x, fx = lo, flo
    it = 0
    while best is None:
        it += 1
        if it > opts.max_iter:
            raise NoConvergence(f"no convergence in {opts.max_iter} iterations", trace)
        _, fl = evaluate(x + 1e-7)
        deriv = (fl - fx) / 1e-7
        cand = x - fx / deriv if deriv != 0 else 0.5 * (lo + hi)
        if not (min(lo, hi) < cand < max(lo, hi)):
            cand = 0.5 * (lo + hi)
        p_c, f_c = evaluate(cand)
        if abs(f_c) < 0.1 * opts.newton_tol or abs(hi - lo) < 1e-15:
            best = (p_c, f_c)
            break
        if f_c * flo <= 0:
            hi = cand
        else:
            lo, flo = cand, f_c
        x, fx = cand, f_c
    prof = best[0]
    # move to the pinned scale: rho_+(0) = N_+ k^2 / pi
    lam2 = target[0] * k ** 2 / math.pi / prof.rho[0, 0]
    shift = math.log(lam2) / betas
    prof = integrate_profile(config, prof.central_w + shift)
    rel = np.abs(prof.line_densities / target - 1.0)
    if np.max(rel) > opts.newton_tol:
        raise NoConvergence(
            "targets are incompatible with the Bennett identity: matching the ratio "
            f"N-/N+ gives N = {prof.line_densities.tolist()} (relative mismatch "
            f"{np.max(rel):.3e})", trace)
    return dataclasses.replace(prof, kind="inverse", iterations=it,
                               initial_guess=origin, trace=tuple(trace))


def bennett_line_densities(config, ratio):
    """Line densities with N_-/N_+ = ``ratio`` that satisfy the Bennett identity.

    sum gamma N N = 2 sum N / beta is quadratic-vs-linear along a ray, so the
    admissible point on the ray is unique (when the quadratic form is positive).
    """
    gamma = coupling_matrix(config).gamma
    d = np.array([1.0, float(ratio)])
    qf = float(d @ gamma @ d)
    lin = 2.0 * float(np.sum(d / config.betas))
    if not qf > 0:
        raise NoConvergence(f"no Bennett-admissible line densities along ratio {ratio}")
    n_plus = lin / qf
    return n_plus * d


def solve_equilibrium_conformal(config, scale_k=None, r_max=None, points=None):
    """Conformal case: the pinch of scale k, checked against the full system.

    Builds u_s = N_s v with v = -ln(1 + k^2 r^2) on the solver's radial grid,
    sets w_s(0) so that rho_s(0) = N_s k^2 / pi, and verifies the radial
    equations using the exact Laplacian of v. Raises NotConformal otherwise.
    """
    res = conformal_residual(config)
    if np.max(np.abs(res)) > 1e-8:
        raise NotConformal(f"conformal residual {res.tolist()} exceeds 1e-8")
    k = config.solver.scale_k if scale_k is None else float(scale_k)
    if not k > 0:
        raise ValueError("scale k must be positive")
    opts = config.solver
    n = config.line_densities
    gamma = coupling_matrix(config).gamma
    models = species_models(config, [sp.min_energy for sp in config.species])
    central_w = central_w_for_density(config, n * k ** 2 / math.pi, models)
    models = species_models(config, central_w)
    if r_max is None:
        r_max = opts.r_max if opts.r_max is not None else opts.r_max_factor / k
    r0 = R0_FACTOR / k
    npts = points or max(int(math.log10(r_max / r0) * opts.points_per_decade), 50) + 1
    r = np.concatenate([[0.0], np.geomspace(r0, r_max, npts)])
    kr2 = (k * r) ** 2
    v = -np.log1p(kr2)
    dv = -2.0 * k ** 2 * r / (1.0 + kr2)
    u = n[:, None] * v[None, :]
    du = n[:, None] * dv[None, :]
    U = gamma @ u
    w = central_w[:, None] + U
    rho = np.vstack([mdl.density(w[i]) for i, mdl in enumerate(models)])
    prim = np.vstack([mdl.primitive(w[i]) for i, mdl in enumerate(models)])
    lap = -4.0 * k ** 2 / (1.0 + kr2) ** 2       # Delta v, exact
    defect = np.max(np.abs(-n[:, None] * lap[None, :] - 4.0 * math.pi * rho)
                    / (4.0 * math.pi * rho[:, :1]))
    if defect > 1e-8:
        raise NotConformal(f"pinch fails the full system (relative defect {defect:.3e})")
    # exact cumulative integrals of the pinch: N(r) = N k^2 r^2 / (1 + k^2 r^2)
    frac = kr2[-1] / (1.0 + kr2[-1])
    n_core = n * frac
    m_core = n_core / config.betas if config.model is Model.BENNETT else None
    prof = RadialProfile(config=config, r=r, u=u, du=du, U=U, w=w, rho=rho, prim=prim,
                         central_w=central_w, n_core=n_core, m_core=m_core,
                         kind="conformal")
    return tail_extend(prof)
