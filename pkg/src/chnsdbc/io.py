"""Output formats: raw field snapshots with JSON sidecars, CSV ledgers, JSON reports.

Layout of a run directory::

    manifest.json
    energy.csv
    snapshots/000000_phi.f8   (+ 000000_phi.json sidecar), one pair per field

Field files hold row-major little-endian float64 values; the sidecar records
``{field, shape, stagger, t, units, dtype}``. Column order of CSV files is
fixed (see :data:`ENERGY_COLUMNS`).
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .diagnostics import EnergyReport
from .grid import Grid
from .state import FieldState

DTYPE = "<f8"
FIELDS = {
    "ux": ("x-face", "velocity"),
    "uy": ("y-face", "velocity"),
    "phi": ("node", "dimensionless"),
    "mu": ("node", "chemical potential"),
    "p": ("cell", "pressure"),
    "phi_gamma": ("wall", "dimensionless"),
}
ENERGY_COLUMNS = EnergyReport.FIELDS
SNAPSHOT_DIR = "snapshots"


def sanitize(obj):
    """Replace non-finite floats by ``None`` and numpy scalars/arrays by Python objects."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(sanitize(obj), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# snapshots


def _snapshot_arrays(state: FieldState) -> dict:
    return {
        "ux": state.ux,
        "uy": state.uy,
        "phi": state.phi,
        "mu": state.mu,
        "p": state.p,
        "phi_gamma": np.stack(state.phi_gamma),
    }


def write_snapshot(outdir, index: int, state: FieldState) -> list[str]:
    """Write one snapshot; returns the relative file names written."""
    d = Path(outdir) / SNAPSHOT_DIR
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for name, arr in _snapshot_arrays(state).items():
        stem = f"{index:06d}_{name}"
        np.ascontiguousarray(arr, dtype=DTYPE).tofile(d / f"{stem}.f8")
        stagger, units = FIELDS[name]
        write_json(d / f"{stem}.json", {"field": name, "shape": list(arr.shape), "stagger": stagger, "t": state.t,
                                         "units": units, "dtype": DTYPE})
        names.append(f"{SNAPSHOT_DIR}/{stem}.f8")
    return names


def read_field(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = read_json(path.with_suffix(".json"))
    arr = np.fromfile(path, dtype=meta.get("dtype", DTYPE)).reshape(meta["shape"])
    return arr.astype(float), meta


def read_snapshot(outdir, index: int, grid: Grid) -> FieldState:
    d = Path(outdir) / SNAPSHOT_DIR
    arrays, t = {}, None
    for name in ("ux", "uy", "phi", "mu", "p"):
        arr, meta = read_field(d / f"{index:06d}_{name}.f8")
        arrays[name] = arr
        t = meta["t"]
    return FieldState(grid, float(t), **arrays)


def snapshot_indices(outdir) -> list[int]:
    d = Path(outdir) / SNAPSHOT_DIR
    if not d.is_dir():
        return []
    return sorted(int(p.name.split("_")[0]) for p in d.glob("*_phi.f8"))


# ---------------------------------------------------------------------------
# CSV


def write_energy_csv(path, ledger: Iterable[EnergyReport], append: bool = False) -> None:
    path = Path(path)
    new = not append or not path.exists()
    with path.open("a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(ENERGY_COLUMNS)
        for r in ledger:
            w.writerow([repr(float(v)) for v in r.row()])


def read_energy_csv(path) -> list[EnergyReport]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != tuple(ENERGY_COLUMNS):
        raise ValueError(f"unexpected energy.csv header {header}")
    return [EnergyReport(*[float(v) for v in row]) for row in body]


def truncate_energy_csv(path, t_max: float) -> None:
    """Drop rows after ``t_max`` (used when resuming from a snapshot)."""
    ledger = [r for r in read_energy_csv(path) if r.t <= t_max * (1 + 1e-14)]
    write_energy_csv(path, ledger)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    np.savetxt(path, np.asarray(matrix), delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# manifest


def environment_info() -> dict:
    from . import kernels

    return {
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "backend": kernels.BACKEND,
    }


def write_manifest(outdir, cfg, *, steps: int, snapshots: Sequence[str], complete: bool, extra: dict | None = None) -> Path:
    from .config import serialize

    path = Path(outdir) / "manifest.json"
    data = {
        "config": serialize(cfg),
        "config_hash": cfg.digest(),
        "grid": {"Lx": cfg.domain.Lx, "Ly": cfg.domain.Ly, "Nx": cfg.domain.Nx, "Ny": cfg.domain.Ny},
        "steps": steps,
        "snapshots": list(snapshots),
        "complete": complete,
        **environment_info(),
    }
    if extra:
        data.update(extra)
    tmp = path.with_suffix(".json.tmp")
    write_json(tmp, data)
    os.replace(tmp, path)
    return path


def read_manifest(path):
    """Load a manifest and its config; returns ``(manifest_dict, RunConfig)``."""
    from .config import parse_config_text

    data = read_json(path)
    cfg = parse_config_text(data["config"], str(path))
    if cfg.digest() != data["config_hash"]:
        raise ValueError("manifest config hash does not match its config")
    return data, cfg


__all__ = [
    "DTYPE",
    "ENERGY_COLUMNS",
    "sanitize",
    "write_json",
    "read_json",
    "write_snapshot",
    "read_snapshot",
    "read_field",
    "snapshot_indices",
    "write_energy_csv",
    "read_energy_csv",
    "truncate_energy_csv",
    "write_matrix_csv",
    "write_manifest",
    "read_manifest",
    "environment_info",
]
