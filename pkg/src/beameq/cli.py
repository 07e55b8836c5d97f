"""
Command line interface.

    beameq solve-radial --config beam.cfg --out out/ [--rmax R] [--tol T] [--verify]
    beameq solve-planar --config beam.cfg --out out/ [--grid N] [--tol T] [--verify]
    beameq pinch        --config beam.cfg --out out/
    beameq verify       --config beam.cfg --out out/
    beameq rearrange    --out out/ [--grid N] [--seed S] [--verify]
    beameq limit-check  --config beam.cfg --out out/ [--verify]

Every command writes CSV/JSON results and PNG figures into ``--out``.
Exit status: 0 on success, 1 when ``--verify`` finds a residual above its
threshold, 2 on input or solver errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io, plotting
from .analytic import pinch_density_radial
from .config import load_config
from .diagnostics import diagnose
from .errors import BeamError
from .pipeline import (limit_sweep, pinch_liouville_check, pinch_mismatch, radial_solution,
                       random_bumps, rearrangement_suite)
from .planar import angular_floor, angular_variation, radial_reference_density, solve_planar
from .radial import ode_defect, solve_equilibrium_conformal

__all__ = ["main", "build_parser"]

log = logging.getLogger("beameq")

PLANAR_LIMITS = {"angular_variation": 1e-3, "radial_mismatch": 1e-3}
PINCH_LIMITS = {"pinch_mismatch": 1e-5, "liouville": 1e-5}
LIMIT_LIMITS = {"ratio_minus_one": 1e-4, "profile_mismatch": 1e-3}


def _config(args):
    if not args.config:
        raise SystemExit("error: --config is required for this command")
    cfg = load_config(args.config)
    solver = cfg.solver
    if args.rmax is not None:
        solver = dataclasses.replace(solver, r_max=args.rmax)
    if args.tol is not None:
        solver = dataclasses.replace(solver, newton_tol=args.tol)
    planar = cfg.planar
    if args.grid is not None:
        planar = dataclasses.replace(planar, grid=args.grid)
    if args.tol is not None:
        planar = dataclasses.replace(planar, tol=args.tol)
    for w in cfg.warnings:
        log.warning("%s", w)
    return dataclasses.replace(cfg, solver=solver, planar=planar)


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(line):
    print(line, flush=True)


def _verdict(args, failures):
    if failures:
        _echo("verify: FAIL (" + ", ".join(failures) + ")")
        return 1 if args.verify else 0
    if args.verify:
        _echo("verify: PASS")
    return 0


def _radial_outputs(profile, out, prefix=""):
    report = diagnose(profile)
    io.emit_profile(profile, out / f"{prefix}profile.csv")
    io.emit_report(report, out / f"{prefix}report.json")
    k = float(np.sqrt(np.pi * profile.rho[0, 0] / profile.config.line_densities[0]))
    reference = None
    if profile.config.is_conformal:
        reference = (profile.r, pinch_density_radial(k, profile.config.line_densities[0], profile.r))
    plotting.plot_profile(profile, out / f"{prefix}density.png", reference)
    return report


def cmd_solve_radial(args):
    cfg = _config(args)
    out = _out(args)
    t0 = time.perf_counter()
    prof = radial_solution(cfg)
    elapsed = time.perf_counter() - t0
    report = _radial_outputs(prof, out)
    _echo(f"solved ({prof.kind}) in {elapsed:.2f} s; N = {prof.line_densities.tolist()}")
    _echo(f"virial residual {report.virial.normalized:.3e}; deficit {report.deficit.normalized:.3e}")
    failures = report.failures()
    if cfg.is_conformal and cfg.model.value == "bennett":
        err, k = pinch_mismatch(prof)
        _echo(f"pinch mismatch on [0, 10/k] (k = {k:.6g}): {err:.3e}")
        if err > PINCH_LIMITS["pinch_mismatch"]:
            failures.append("pinch_mismatch")
    return _verdict(args, failures)


def cmd_pinch(args):
    cfg = _config(args)
    out = _out(args)
    prof = solve_equilibrium_conformal(cfg)
    report = _radial_outputs(prof, out, "pinch_")
    k = cfg.solver.scale_k
    liou = pinch_liouville_check(k)
    io.emit_json({"scale_k": k, "liouville_max_residual": liou,
                  "central_density": prof.rho[:, 0].tolist()}, out / "pinch.json")
    _echo(f"pinch k = {k:g}: Liouville residual {liou:.3e}, "
          f"virial {report.virial.normalized:.3e}")
    failures = report.failures()
    if liou > PINCH_LIMITS["liouville"]:
        failures.append("liouville")
    return _verdict(args, failures)


def cmd_verify(args):
    args.verify = True
    cfg = _config(args)
    out = _out(args)
    prof = radial_solution(cfg)
    report = _radial_outputs(prof, out)
    for key, value in report.as_dict().items():
        _echo(f"{key}: {value}")
    _echo(f"ode defect: {ode_defect(prof):.3e}")
    return _verdict(args, report.failures())


def cmd_solve_planar(args):
    cfg = _config(args)
    out = _out(args)
    t0 = time.perf_counter()
    reference = radial_solution(cfg)
    sol = solve_planar(cfg, reference=reference)
    elapsed = time.perf_counter() - t0
    names = ("plus", "minus")
    for s in range(2):
        io.emit_field(sol.rho[s], out / f"rho_{names[s]}.csv")
        io.emit_field(sol.u[s], out / f"u_{names[s]}.csv")
    rho = sol.rho[0]
    mask = rho.mask
    ref = radial_reference_density(reference, rho.radii()[mask])
    mismatch = max(float(np.max(np.abs(sol.rho[s].values[mask] - ref[s])) / np.max(ref[s]))
                   for s in range(2))
    variation = max(angular_variation(f) for f in sol.rho)
    floor = max(angular_floor(f) for f in sol.rho)
    summary = {"iterations": sol.iterations, "update_norm": sol.update_norm,
               "omega": sol.omega, "radius": sol.radius, "grid": rho.n,
               "boundary": sol.boundary_mode,
               "line_densities": sol.line_densities.tolist(), "targets": sol.targets.tolist(),
               "angular_variation": variation, "angular_floor": floor,
               "radial_mismatch": mismatch, "seconds": elapsed,
               "update_history": list(sol.history)}
    io.emit_json(summary, out / "planar.json")
    plotting.plot_planar(sol, out / "planar.png")
    _echo(f"planar: {sol.iterations} sweeps in {elapsed:.1f} s; angular variation "
          f"{variation:.3e} (floor {floor:.3e}); radial mismatch {mismatch:.3e}")
    failures = [k for k, lim in PLANAR_LIMITS.items() if summary[k] > lim]
    return _verdict(args, failures)


def cmd_rearrange(args):
    out = _out(args)
    rng = np.random.default_rng(args.seed)
    n = args.grid or 129
    field = random_bumps(rng, n=n)
    result, star = rearrangement_suite(field)
    result["seed"] = args.seed
    io.emit_field(field, out / "field.csv")
    io.emit_field(star, out / "rearranged.csv")
    io.emit_json(result, out / "rearrange.json")
    plotting.plot_rearrangement(field, star, out / "rearrange.png")
    _echo(", ".join(f"{k} = {v}" for k, v in result.items()))
    failures = []
    if result["equimeasurability_rings"] > 1.0:
        failures.append("equimeasurability")
    if result["mass_error"] > 1e-12:
        failures.append("mass")
    if not result["idempotent"]:
        failures.append("idempotence")
    if result["perimeter_excess_rings"] > 1.0:
        failures.append("perimeter")
    return _verdict(args, failures)


def cmd_limit_check(args):
    cfg = _config(args)
    out = _out(args)
    rows = limit_sweep(cfg)
    lines = ["fugacity,ratio_plus,ratio_minus,profile_mismatch"]
    lines += [f"{r['fugacity']!r},{r['ratio'][0]!r},{r['ratio'][1]!r},{r['profile_mismatch']!r}"
              for r in rows]
    io.emit_text(out / "limit.csv", "\n".join(lines) + "\n")
    io.emit_json({"rows": rows}, out / "limit.json")
    plotting.plot_limit(rows, out / "limit.png")
    for r in rows:
        _echo(f"z = {r['fugacity']:.0e}: M beta/N - 1 = {max(r['ratio_minus_one']):.3e}, "
              f"profile mismatch {r['profile_mismatch']:.3e}")
    failures = []
    if any(min(r["ratio"]) <= 1.0 for r in rows):
        failures.append("strictness")
    for r in rows:
        if r["fugacity"] <= 1e-5:
            if max(r["ratio_minus_one"]) > LIMIT_LIMITS["ratio_minus_one"]:
                failures.append("classical_ratio")
            if r["profile_mismatch"] > LIMIT_LIMITS["profile_mismatch"]:
                failures.append("profile_mismatch")
    return _verdict(args, failures)


COMMANDS = {
    "solve-radial": (cmd_solve_radial, "radial equilibrium (inverse mode, or pinch forward)"),
    "solve-planar": (cmd_solve_planar, "disk Picard solve from a perturbed start"),
    "pinch": (cmd_pinch, "closed-form pinch and its residuals"),
    "verify": (cmd_verify, "radial solve plus the full identity suite"),
    "rearrange": (cmd_rearrange, "rearrangement property checks on a seeded field"),
    "limit-check": (cmd_limit_check, "Thomas-Fermi to Bennett fugacity sweep"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="beameq", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="configuration file (section.key = value)")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--rmax", type=float, help="outer radius of the radial grid")
        p.add_argument("--grid", type=int, help="planar grid points per side")
        p.add_argument("--tol", type=float, help="Newton / Picard tolerance")
        p.add_argument("--verify", action="store_true",
                       help="exit 1 if any residual exceeds its acceptance threshold")
        p.add_argument("--seed", type=int, default=0, help="seed for generated test fields")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    func = COMMANDS[args.command][0]
    try:
        return func(args)
    except (BeamError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

