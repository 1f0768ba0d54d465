"""Delimited and JSON artifacts.

Floats are written with shortest round-trip formatting and objects with a
fixed key order, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .correlation import CorrelationField
from .density import DensityField
from .models import UsageError, spec_from_json, spec_to_json

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "fmt_float",
    "write_density_csv",
    "write_triangle_csv",
    "write_estimate_csv",
    "write_report",
    "load_experiment_config",
    "default_out_dir",
]


def default_out_dir() -> Path:
    return Path(os.environ.get("NESSCORR_OUTDIR", "."))


def fmt_float(v) -> str:
    """Shortest round-trip decimal form of a float."""
    return repr(float(v))


_fmt = fmt_float


def write_density_csv(path, field: DensityField):
    lines = ["x,value"]
    for x in range(field.N + 1):
        lines.append(f"{x},{_fmt(field.values[x])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_triangle_csv(path, field: CorrelationField, spec=None):
    """Triangle table plus a sidecar <path>.meta.json metadata block."""
    lines = ["x,y,value"]
    for (x, y, v) in field.triangle_table():
        lines.append(f"{x},{y},{_fmt(v)}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "schema_version": SCHEMA_VERSION,
        "diagonal_mode": field.diagonal_mode,
        "time": float(field.time_label),
    }
    if spec is not None:
        meta["spec"] = spec_to_json(spec)
    write_report(str(path) + ".meta.json", meta)


def write_estimate_csv(path, est):
    lines = ["kind,x,y,mean,stderr"]
    for x in range(1, est.spec.N):
        lines.append(f"x,{x},,{_fmt(est.rho_mean[x - 1])},{_fmt(est.rho_se[x - 1])}")
    for (x, y, m, s) in est.pairs:
        lines.append(f"xy,{x},{y},{_fmt(m)},{_fmt(s)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_report(path, payload: dict):
    doc = dict(payload)
    doc.setdefault("schema_version", SCHEMA_VERSION)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True,
                                     default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


_CONFIG_KEYS = {"spec", "initial", "t", "M", "dt", "seed", "command", "output"}
_INITIAL_KEYS = {"family", "profile"}


def load_experiment_config(path):
    """Parse and validate the experiment config document.

    Schema: {spec: <model doc>, initial: {family, profile}, t, M, dt?, seed};
    unknown keys are rejected.  profile is "stationary", a number, or an
    explicit list of N+1 values.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    if "spec" not in doc:
        raise UsageError("config requires a 'spec' block")
    spec = spec_from_json(doc["spec"])
    initial = doc.get("initial", {})
    if not isinstance(initial, dict):
        raise UsageError("'initial' must be an object")
    bad = set(initial) - _INITIAL_KEYS
    if bad:
        raise UsageError(f"unknown initial keys: {sorted(bad)}")
    out = {
        "spec": spec,
        "family": initial.get("family"),
        "profile": initial.get("profile", "stationary"),
        "t": float(doc.get("t", 0.0)),
        "M": int(doc.get("M", 0) or 0),
        "dt": float(doc["dt"]) if "dt" in doc else None,
        "seed": int(doc.get("seed", 0) or 0),
    }
    if out["t"] < 0:
        raise UsageError("t must be non-negative")
    return out


def resolve_profile(spec, profile) -> "DensityField":
    """Materialize a profile descriptor into a pinned field."""
    from .density import DensityField, constant_field, stationary_density

    if profile == "stationary" or profile is None:
        return stationary_density(spec)
    if isinstance(profile, str):
        try:
            profile = float(profile)
        except ValueError:
            raise UsageError(f"unknown profile {profile!r}") from None
    if isinstance(profile, (int, float)):
        return constant_field(spec, float(profile))
    vals = np.asarray(profile, dtype=float)
    if vals.shape != (spec.N + 1,):
        raise UsageError(f"explicit profile needs {spec.N + 1} values (sites 0..N)")
    return DensityField(spec.N, vals)
