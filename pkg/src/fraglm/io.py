"""Dataset CSV files, JSON sidecars, YAML configs and result serialization.

A dataset is stored as ``name.csv`` with header ``t_1,...,t_p,Y``, one row
per curve, ``NaN`` for unobserved points. The grid (``t_min``, ``t_max``,
``grid_points``) and the ``noisy`` flag live in ``name.json``, which the
simulator also uses for the generating truth.
"""

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
import yaml

from .core import FunctionalDataset, make_grid
from .exceptions import ConfigurationError, InvalidArgumentError


def sidecar_path(csv_path):
    return Path(csv_path).with_suffix(".json")


def _fmt(x):
    return "NaN" if not np.isfinite(x) else repr(float(x))


def write_dataset(dataset, path, extra=None):
    """Write ``dataset`` to ``path`` (CSV) plus its JSON sidecar."""
    path = Path(path)
    p = dataset.grid.size
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"t_{k + 1}" for k in range(p)] + ["Y"])
        for row, y in zip(dataset.values, dataset.responses):
            writer.writerow([_fmt(v) for v in row] + [_fmt(y)])
    meta = dict(
        t_min=dataset.grid.t_min,
        t_max=dataset.grid.t_max,
        grid_points=p,
        noisy=dataset.noisy,
    )
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(to_jsonable(meta), indent=2))
    return path


def read_sidecar(csv_path):
    side = sidecar_path(csv_path)
    if not side.exists():
        return {}
    try:
        return json.loads(side.read_text())
    except json.JSONDecodeError as err:
        raise InvalidArgumentError(f"cannot parse sidecar {side}: {err}") from None


def read_dataset(path, t_min=None, t_max=None, noisy=None):
    """Read a dataset CSV. Grid bounds default to the sidecar, then to [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise InvalidArgumentError(f"no such file: {path}")
    meta = read_sidecar(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InvalidArgumentError(f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "Y" or len(header) < 3:
        raise InvalidArgumentError(f"{path}: header must be t_1,...,t_p,Y")
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as err:
        raise InvalidArgumentError(f"{path}: non-numeric entry ({err})") from None
    if body.ndim != 2 or body.shape[1] != len(header):
        raise InvalidArgumentError(f"{path}: ragged rows")
    p = body.shape[1] - 1
    if "grid_points" in meta and int(meta["grid_points"]) != p:
        raise InvalidArgumentError(f"sidecar says {meta['grid_points']} grid points, CSV has {p}")
    grid = make_grid(
        meta.get("t_min", 0.0) if t_min is None else t_min,
        meta.get("t_max", 1.0) if t_max is None else t_max,
        p,
    )
    values = body[:, :p]
    noisy = bool(meta.get("noisy", False)) if noisy is None else bool(noisy)
    return FunctionalDataset(grid, values, np.isfinite(values), body[:, p], noisy)


def to_jsonable(obj):
    """Recursively convert numpy/dataclass/enum values into JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enum
        return obj.value
    return obj


def write_eigensystem(system, path):
    """One column per eigenfunction; the header carries the eigenvalues."""
    header = ["t", "mean"] + [f"lambda_{j + 1}={lam!r}" for j, lam in enumerate(system.eigenvalues.tolist())]
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(system.grid.points):
            writer.writerow([repr(float(t)), repr(float(system.mean[k]))] + [repr(float(v)) for v in system.eigenfunctions[:, k]])


def read_eigensystem(path):
    """Inverse of :func:`write_eigensystem` (returns grid points, mean, lambdas, phi)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    lams = np.array([float(h.split("=", 1)[1]) for h in rows[0][2:]])
    body = np.array([[float(v) for v in r] for r in rows[1:]])
    return body[:, 0], body[:, 1], lams, body[:, 2:].T


def load_config(path, allowed):
    """Flat YAML mapping whose keys must be a subset of ``allowed``."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"no such config file: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as err:
        raise ConfigurationError(f"cannot parse {path}: {err}") from None
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a flat key: value mapping")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"unknown config keys {unknown}; allowed: {sorted(allowed)}")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigurationError(f"config key {k!r} must be a scalar or list, not a mapping")
    return data
