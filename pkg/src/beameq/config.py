"""
Beam configuration: data types and the ``section.key = value`` parser.

Grammar (one assignment per line, ``#`` starts a comment)::

    model = bennett                 # or thomas-fermi
    plus.charge = 1
    plus.mass = 1
    plus.temperature = 1
    plus.drift = 0.5
    plus.line_density = 3.4641016151377544
    minus.charge = -1
    ...
    solver.r_max = 1e6              # optional, any SolverOptions field
    planar.grid = 257               # optional, any PlanarOptions field

``plus.line_density = conformal`` (for both species) asks for the line
densities that satisfy the conformal condition.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError
from .species import Model, SpeciesParams

__all__ = ["SolverOptions", "PlanarOptions", "BeamConfig", "parse_config",
           "load_config", "format_config"]


@dataclass(frozen=True)
class SolverOptions:
    """Radial solver controls.

    ``r_max`` is absolute; when None it is ``r_max_factor`` times the core
    length read off the central densities. ``tail_window`` is the fraction
    of ``r_max`` where the outer fit window starts.
    """

    r_max: Optional[float] = None
    r_max_factor: float = 1e6
    ode_rtol: float = 1e-12
    quad_rtol: float = 1e-10
    newton_tol: float = 1e-8
    max_iter: int = 40
    damping: float = 1.0
    tail_window: float = 0.1
    points_per_decade: int = 200
    confinement_eps: float = 0.05
    scale_k: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"solver.{f.name} must be positive, got {v!r}")
        if not self.tail_window < 1:
            raise ValueError("solver.tail_window must lie in (0, 1)")


@dataclass(frozen=True)
class PlanarOptions:
    """Disk solver controls; ``radius`` in units of the pinch scale 1/k when None."""

    radius: Optional[float] = None
    radius_factor: float = 2.0
    grid: int = 257
    omega: float = 0.5
    tol: float = 1e-10
    max_iter: int = 2000
    boundary: str = "radial"
    perturbation: float = 0.2
    mode: int = 2

    def __post_init__(self):
        if not 0 < self.omega <= 1:
            raise ValueError("planar.omega must lie in (0, 1]")
        if self.grid < 9 or self.grid % 2 == 0:
            raise ValueError("planar.grid must be an odd integer >= 9")
        if self.boundary not in ("radial", "zero"):
            raise ValueError("planar.boundary must be 'radial' or 'zero'")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("planar.tol and planar.max_iter must be positive")


@dataclass(frozen=True)
class BeamConfig:
    """Two species plus model selector and solver options."""

    model: Model
    plus: SpeciesParams
    minus: SpeciesParams
    solver: SolverOptions = field(default_factory=SolverOptions)
    planar: PlanarOptions = field(default_factory=PlanarOptions)
    warnings: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "model", Model.parse(self.model))
        if self.plus.drift == self.minus.drift:
            raise ValidationError("drift speeds must differ (nu_plus == nu_minus)")
        if self.current == 0:
            raise ValidationError("total current I vanishes; no stationary beam")

    @property
    def species(self):
        return (self.plus, self.minus)

    @property
    def charges(self):
        return np.array([self.plus.charge, self.minus.charge])

    @property
    def drifts(self):
        return np.array([self.plus.drift, self.minus.drift])

    @property
    def betas(self):
        return np.array([self.plus.beta, self.minus.beta])

    @property
    def line_densities(self):
        return np.array([self.plus.line_density, self.minus.line_density])

    @property
    def current(self):
        """I = sum_s q_s nu_s N_s (c = 1)."""
        return float(np.sum(self.charges * self.drifts * self.line_densities))

    @property
    def charge(self):
        """Q = sum_s q_s N_s."""
        return float(np.sum(self.charges * self.line_densities))

    def with_line_densities(self, n_plus, n_minus):
        return dataclasses.replace(self, plus=self.plus.with_line_density(n_plus),
                                   minus=self.minus.with_line_density(n_minus))

    def with_model(self, model):
        return dataclasses.replace(self, model=Model.parse(model))

    @property
    def is_conformal(self):
        from .coupling import conformal_residual
        return bool(np.all(np.abs(conformal_residual(self)) < 1e-8))


_SPECIES_KEYS = ("charge", "mass", "temperature", "drift", "line_density")


def _coerce(opt_cls, key, raw, line):
    fields = {f.name: f for f in dataclasses.fields(opt_cls)}
    if key not in fields:
        raise ParseError(f"unknown option {key!r}", line)
    default = fields[key].default
    if isinstance(default, str):
        return raw
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        if raw.lower() == "none":
            return None
        return float(raw)
    except ValueError:
        raise ParseError(f"bad value {raw!r} for {key}", line) from None


def parse_config(text):
    """Parse and validate a configuration document.

    Raises ParseError for malformed lines and ValidationError (carrying the
    offending line number when there is one) for physically invalid input.
    """
    model = None
    species = {"plus": {}, "minus": {}}
    lines_of = {}
    solver, planar = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ParseError("empty key or value", lineno)
        if key == "model":
            try:
                model = Model.parse(value)
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            continue
        if "." not in key:
            raise ParseError(f"key {key!r} needs a section prefix", lineno)
        section, name = key.split(".", 1)
        if section in species:
            if name not in _SPECIES_KEYS:
                raise ParseError(f"unknown species field {name!r}", lineno)
            if name == "line_density" and value.lower() == "conformal":
                species[section][name] = "conformal"
            else:
                try:
                    species[section][name] = float(value)
                except ValueError:
                    raise ParseError(f"bad number {value!r}", lineno) from None
            lines_of[(section, name)] = lineno
        elif section == "solver":
            solver[name] = _coerce(SolverOptions, name, value, lineno)
            lines_of[("solver", name)] = lineno
        elif section == "planar":
            planar[name] = _coerce(PlanarOptions, name, value, lineno)
            lines_of[("planar", name)] = lineno
        else:
            raise ParseError(f"unknown section {section!r}", lineno)

    if model is None:
        raise ParseError("missing 'model' assignment")
    for sec in ("plus", "minus"):
        missing = [k for k in _SPECIES_KEYS if k not in species[sec]]
        if missing:
            raise ParseError(f"{sec}: missing {', '.join(missing)}")

    want_conformal = [species[s]["line_density"] == "conformal" for s in ("plus", "minus")]
    if any(want_conformal) and not all(want_conformal):
        raise ValidationError("'conformal' line density must be given for both species")

    built = {}
    for sec in ("plus", "minus"):
        vals = dict(species[sec])
        if want_conformal[0]:
            vals["line_density"] = 1.0
        try:
            built[sec] = SpeciesParams(**vals)
        except ValueError as exc:
            bad = next((k for k in _SPECIES_KEYS if k in str(exc).replace(" ", "_")), None)
            raise ValidationError(f"{sec}: {exc}", lines_of.get((sec, bad))) from None

    if built["plus"].drift == built["minus"].drift:
        raise ValidationError("drift speeds must differ (nu_plus == nu_minus)",
                              lines_of.get(("minus", "drift")))
    if want_conformal[0]:
        from .coupling import solve_conformal_line_densities
        n_p, n_m = solve_conformal_line_densities(built["plus"], built["minus"])
        built = {"plus": built["plus"].with_line_density(n_p),
                 "minus": built["minus"].with_line_density(n_m)}

    try:
        solver_opts = SolverOptions(**solver)
        planar_opts = PlanarOptions(**planar)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    current = sum(built[s].charge * built[s].drift * built[s].line_density
                  for s in ("plus", "minus"))
    if current == 0 or abs(current) < 1e-14 * max(built[s].line_density for s in built):
        raise ValidationError("total current I vanishes; no stationary beam",
                              lines_of.get(("minus", "line_density")))

    cfg = BeamConfig(model, built["plus"], built["minus"], solver_opts, planar_opts)

    from .coupling import confinement_exponents
    e = confinement_exponents(cfg)
    warn = tuple(f"{name}: confinement exponent {val:.6g} < {1 + solver_opts.confinement_eps:g}"
                 for name, val in zip(("plus", "minus"), e)
                 if val < 1 + solver_opts.confinement_eps)
    return dataclasses.replace(cfg, warnings=warn)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg):
    """Inverse of :func:`parse_config` (options written only when non-default)."""
    out = [f"model = {cfg.model.value}"]
    for name, sp in (("plus", cfg.plus), ("minus", cfg.minus)):
        for key in _SPECIES_KEYS:
            out.append(f"{name}.{key} = {getattr(sp, key)!r}")
    for section, opts in (("solver", cfg.solver), ("planar", cfg.planar)):
        for f in dataclasses.fields(opts):
            v = getattr(opts, f.name)
            if v != f.default:
                out.append(f"{section}.{f.name} = {v!r}" if not isinstance(v, str)
                           else f"{section}.{f.name} = {v}")
    return "\n".join(out) + "\n"
