"""
Exact identities and inequalities evaluated as residuals on solver output.

Every residual is reported raw and normalized; acceptance thresholds apply
to the normalized values because the Bennett model is scale invariant.
Profiles from either solver are accepted as long as they expose
``config``, ``line_densities`` and ``masses`` (radial profiles add ``r``,
``du`` and ``tail`` for the asymptote checks).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coupling import confinement_exponents, coupling_matrix, current_and_charge, quadratic_form
from .errors import NonIntegrableTail, WrongModel
from .species import Model

__all__ = [
    "Residual",
    "DiagnosticsReport",
    "THRESHOLDS",
    "masses",
    "virial_residual",
    "bennett_residual",
    "isoperimetric_deficit",
    "asymptote_check",
    "tail_exponent_check",
    "diagnose",
    "classical_ratio",
]

# acceptance thresholds on normalized values
THRESHOLDS = {
    "virial": 1e-6,
    "bennett": 1e-6,
    "deficit": 1e-5,
    "asymptote": 1e-2,
    "tail_exponent": 2e-2,
}


@dataclass(frozen=True)
class Residual:
    raw: float
    normalized: float

    def as_dict(self):
        return {"raw": self.raw, "normalized": self.normalized}


def masses(profile):
    """M_s = int g_s(U_s) dx including the analytic power-law tail.

    Raises NonIntegrableTail when the fitted tail exponent does not exceed 2.
    """
    tail = getattr(profile, "tail", None)
    if tail is not None and np.any(tail.alpha <= 2):
        raise NonIntegrableTail(f"primitive tail exponents {tail.alpha.tolist()} <= 2")
    if profile.masses is None:
        raise NonIntegrableTail("profile carries no tail-corrected masses")
    m = np.asarray(profile.masses, dtype=float)
    if not np.all(np.isfinite(m)):
        raise NonIntegrableTail("masses are not finite")
    return m


def _current_charge(profile):
    return current_and_charge(profile.config, profile.line_densities)


def virial_residual(profile):
    """(I^2 - Q^2) - 2 sum M_s, normalized by (I^2 + Q^2 + 2 sum M_s)."""
    cur, chg = _current_charge(profile)
    j = float(np.sum(masses(profile)))
    raw = cur * cur - chg * chg - 2.0 * j
    return Residual(raw, raw / (cur * cur + chg * chg + 2.0 * j))


def bennett_residual(profile):
    """(I^2 - Q^2) - 2 sum N_s / beta_s for Bennett profiles.

    Raises WrongModel for Thomas-Fermi profiles, which satisfy only the
    virial form.
    """
    if profile.config.model is not Model.BENNETT:
        raise WrongModel("the Bennett identity holds only in the Bennett model")
    cur, chg = _current_charge(profile)
    kt = float(np.sum(np.asarray(profile.line_densities) / profile.config.betas))
    raw = cur * cur - chg * chg - 2.0 * kt
    return Residual(raw, raw / (cur * cur + chg * chg + 2.0 * kt))


def isoperimetric_deficit(profile):
    """1/2 sum gamma N N - sum M_s; normalized by sum M_s."""
    gamma = coupling_matrix(profile.config).gamma
    total = float(np.sum(masses(profile)))
    raw = 0.5 * quadratic_form(gamma, profile.line_densities) - total
    return Residual(raw, raw / total)


def asymptote_check(profile):
    """Max relative error of r u_s'(r) against -2 N_s over the tail window."""
    tail = profile.tail
    if tail is None:
        raise ValueError("asymptote check needs a tail-fitted radial profile")
    sel = profile.r >= tail.window[0]
    n = np.asarray(profile.line_densities, dtype=float)
    ru = profile.du[:, sel] * profile.r[sel]
    return np.max(np.abs(ru / (-2.0 * n[:, None]) - 1.0), axis=1)


def tail_exponent_check(profile):
    """(fitted alpha_s, predicted 2 e_s, relative difference) per species."""
    predicted = 2.0 * confinement_exponents(profile.config, profile.line_densities)
    alpha = profile.tail.alpha
    return alpha, predicted, np.abs(alpha / predicted - 1.0)


@dataclass(frozen=True)
class DiagnosticsReport:
    model: str
    line_densities: np.ndarray
    current: float
    charge: float
    masses: np.ndarray
    j: float
    virial: Residual
    bennett: Optional[Residual]
    deficit: Residual
    asymptote_errors: Optional[np.ndarray]
    confinement: dict = field(default_factory=dict)

    def failures(self, thresholds=None):
        """Names of checks whose normalized value exceeds its threshold."""
        th = dict(THRESHOLDS, **(thresholds or {}))
        bad = []
        if abs(self.virial.normalized) > th["virial"]:
            bad.append("virial")
        if self.bennett is not None and abs(self.bennett.normalized) > th["bennett"]:
            bad.append("bennett")
        if abs(self.deficit.normalized) > th["deficit"]:
            bad.append("deficit")
        if self.asymptote_errors is not None and np.max(self.asymptote_errors) > th["asymptote"]:
            bad.append("asymptote")
        rel = self.confinement.get("tail_exponent_error")
        if rel is not None and max(rel) > th["tail_exponent"]:
            bad.append("tail_exponent")
        if not self.confinement.get("passed", True):
            bad.append("confinement")
        return bad

    def as_dict(self):
        """JSON-ready mapping with the fixed report key set."""
        return {
            "model": self.model,
            "N": [float(x) for x in self.line_densities],
            "I": self.current,
            "Q": self.charge,
            "M": [float(x) for x in self.masses],
            "J": self.j,
            "virial_residual": self.virial.as_dict(),
            "bennett_residual": None if self.bennett is None else self.bennett.as_dict(),
            "deficit": self.deficit.as_dict(),
            "asymptote_errors": (None if self.asymptote_errors is None
                                 else [float(x) for x in self.asymptote_errors]),
            "confinement": self.confinement,
        }


def diagnose(profile, eps=None):
    """Run the full identity suite on a radial or planar profile."""
    from .radial import validate_confinement

    cfg = profile.config
    n = np.asarray(profile.line_densities, dtype=float)
    m = masses(profile)
    cur, chg = current_and_charge(cfg, n)
    conf = validate_confinement(cfg, n, eps).as_dict()
    asym = None
    if getattr(profile, "tail", None) is not None and hasattr(profile, "du"):
        asym = asymptote_check(profile)
        alpha, predicted, rel = tail_exponent_check(profile)
        conf.update(tail_exponent=[float(a) for a in alpha],
                    tail_exponent_predicted=[float(a) for a in predicted],
                    tail_exponent_error=[float(a) for a in rel])
    ben = bennett_residual(profile) if cfg.model is Model.BENNETT else None
    return DiagnosticsReport(
        model=cfg.model.value, line_densities=n, current=cur, charge=chg, masses=m,
        j=float(np.sum(m)), virial=virial_residual(profile), bennett=ben,
        deficit=isoperimetric_deficit(profile), asymptote_errors=asym, confinement=conf)


def classical_ratio(profile):
    """M_s beta_s / N_s per species (1 in the Bennett model, > 1 for Thomas-Fermi)."""
    return masses(profile) * profile.config.betas / np.asarray(profile.line_densities)

