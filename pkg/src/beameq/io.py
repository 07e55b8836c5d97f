"""
Bit-stable result emission: profile CSV, field CSV matrices and JSON reports.

Numbers are written with 17 significant digits, which round-trips every
float64 exactly. Files use LF line endings regardless of platform.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import IoError

__all__ = [
    "PROFILE_COLUMNS",
    "profile_table",
    "emit_profile",
    "read_profile",
    "emit_field",
    "read_field",
    "report_schema",
    "validate_report",
    "emit_report",
    "emit_json",
    "emit_text",
]

PROFILE_COLUMNS = ("r", "u_plus", "u_minus", "U_plus", "U_minus", "rho_plus", "rho_minus")


def _fmt(x):
    return "%.17g" % x


def emit_text(path, text):
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def profile_table(profile):
    """(n, 7) array in PROFILE_COLUMNS order."""
    return np.column_stack([profile.r, profile.u[0], profile.u[1], profile.U[0],
                            profile.U[1], profile.rho[0], profile.rho[1]])


def emit_profile(profile, path):
    table = profile_table(profile)
    lines = [",".join(PROFILE_COLUMNS)]
    lines.extend(",".join(_fmt(x) for x in row) for row in table)
    return emit_text(path, "\n".join(lines) + "\n")


def read_profile(path):
    """Read a profile CSV back as {column: array}; bitwise inverse of emit_profile."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            header = fh.readline().rstrip("\n").split(",")
            rows = [[float(v) for v in line.rstrip("\n").split(",")] for line in fh if line.strip()]
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if tuple(header) != PROFILE_COLUMNS:
        raise IoError(f"unexpected profile header {header}")
    data = np.array(rows, dtype=float).reshape(-1, len(PROFILE_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(PROFILE_COLUMNS)}


def emit_field(field, path):
    """Node values as a CSV matrix, row index = y."""
    lines = [",".join(_fmt(x) for x in row) for row in np.asarray(field.values)]
    return emit_text(path, "\n".join(lines) + "\n")


def read_field(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def report_schema():
    text = resources.files("beameq").joinpath("data/report.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_report(data):
    """Raise IoError if ``data`` does not satisfy the report schema."""
    try:
        jsonschema.validate(data, report_schema())
    except jsonschema.ValidationError as exc:
        raise IoError(f"report does not match schema: {exc.message}") from exc


def emit_json(data, path):
    """Sorted-key JSON; non-finite numbers are rejected with IoError."""
    try:
        text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise IoError(f"cannot serialise {path}: {exc}") from exc
    return emit_text(path, text + "\n")


def emit_report(report, path):
    """Write a DiagnosticsReport (or its dict form) after schema validation."""
    data = report.as_dict() if hasattr(report, "as_dict") else dict(report)
    validate_report(data)
    return emit_json(data, path)
