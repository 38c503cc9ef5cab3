"""Run artifacts: CSV tables, the run manifest, field dumps and checkpoints.

Field dumps use the legacy VTK ``STRUCTURED_POINTS`` ASCII layout: a header
with dimensions, origin and spacing, then one ``VECTORS`` block per field with
one ``x y z`` triple per line, point ``(i, j, l)`` stored at line
``i + nx * (j + ny * l)`` (x fastest).

Checkpoints are ``.npz`` archives with a ``header`` array
``[K, N, dt, Re, k]`` followed by the coefficient vectors of the state in
global DOF order.
"""
from __future__ import annotations

import csv
import json
import math
import platform
from dataclasses import fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .diagnostics import DiagnosticsRecord, sample_uniform
from .spaces import Discretization, Field
from .mesh import SpaceKind
from .timestepping import SimState

ERROR_COLUMNS = [
    "K", "N", "h", "t",
    "err_u1", "err_u2", "err_w1", "err_w2", "err_P0", "err_P3",
    "dual_diff_u", "dual_diff_w",
]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


class CsvWriter:
    """Row-at-a-time CSV writer that flushes after every row.

    Partial output survives a crash, which matters for long runs that fail
    late (the rows up to the failure are still on disk).
    """

    def __init__(self, path, columns, keep_until: float | None = None):
        """``keep_until``: keep existing rows with ``t <= keep_until`` (resumed runs)."""
        self.path = Path(path)
        self.columns = list(columns)
        kept = []
        if keep_until is not None and self.path.exists():
            kept = [r for r in read_csv(self.path) if r["t"] <= keep_until + 1e-12]
        self._fh = open(self.path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(self.columns)
        for row in kept:
            self.write(row)
        self._fh.flush()

    def write(self, row: dict):
        self._w.writerow([_fmt(row.get(c)) for c in self.columns])
        self._fh.flush()

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def diagnostics_writer(path, keep_until: float | None = None) -> CsvWriter:
    return CsvWriter(path, DiagnosticsRecord.columns(), keep_until)


def write_diagnostics(path, records) -> Path:
    with diagnostics_writer(path) as w:
        for rec in records:
            w.write(rec.as_row())
    return Path(path)


def read_csv(path) -> list[dict]:
    """Rows of a CSV written here, with numeric cells converted to float."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({k: (float(v) if v not in ("", None) else None) for k, v in row.items()})
    return out


def write_errors(path, rows) -> Path:
    with CsvWriter(path, ERROR_COLUMNS) as w:
        for row in rows:
            w.write(row)
    return Path(path)


def write_spectrum(path, spectra) -> Path:
    """``spectra``: iterable of ``(t, k, E)``; one row per (time, shell)."""
    with CsvWriter(path, ["t", "k", "E"]) as w:
        for t, k, E in spectra:
            for kk, ee in zip(k, E):
                w.write({"t": float(t), "k": int(kk), "E": float(ee)})
    return Path(path)


def write_manifest(path, config, **extra) -> Path:
    """JSON record of everything that determines the results of a run."""
    cfg = config.as_dict()
    cfg = {k: (str(v) if isinstance(v, float) and not math.isfinite(v) else v) for k, v in cfg.items()}
    manifest = {
        "artifact": "dualfield",
        "version": __version__,
        "config": cfg,
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return Path(path)


# -- structured-points field dumps ---------------------------------------------

def write_vtk(path, disc: Discretization, fields_: dict, n: int, title: str = "dualfield") -> Path:
    """Sample vector fields on the uniform periodic ``n**3`` lattice and dump them."""
    mesh = disc.mesh
    spacing = mesh.lengths / n
    blocks = {}
    for name, f in fields_.items():
        if not f.is_vector:
            raise ValueError(f"{name}: only vector fields are dumped")
        _, vals = sample_uniform(disc, f, n)
        blocks[name] = vals
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {n} {n} {n}\n")
        fh.write("ORIGIN " + " ".join(repr(float(v)) for v in mesh.box_min) + "\n")
        fh.write("SPACING " + " ".join(repr(float(v)) for v in spacing) + "\n")
        fh.write(f"POINT_DATA {n ** 3}\n")
        for name, vals in blocks.items():
            fh.write(f"VECTORS {name} double\n")
            np.savetxt(fh, vals, fmt="%.17g")
    return Path(path)


def read_vtk(path) -> dict:
    """Inverse of :func:`write_vtk`: header values and one ``(n_points, 3)`` array per field."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# vtk DataFile"):
        raise ValueError(f"{path}: not a legacy VTK file")
    out = {"title": lines[1], "fields": {}}
    i = 2
    npts = None
    while i < len(lines):
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        key = parts[0].upper()
        if key == "DIMENSIONS":
            out["dimensions"] = tuple(int(v) for v in parts[1:4])
        elif key == "ORIGIN":
            out["origin"] = np.array([float(v) for v in parts[1:4]])
        elif key == "SPACING":
            out["spacing"] = np.array([float(v) for v in parts[1:4]])
        elif key == "POINT_DATA":
            npts = int(parts[1])
        elif key == "VECTORS":
            if npts is None:
                raise ValueError(f"{path}: VECTORS before POINT_DATA")
            block = np.array([[float(v) for v in ln.split()] for ln in lines[i:i + npts]])
            out["fields"][parts[1]] = block.reshape(npts, 3)
            i += npts
    return out


def vtk_points(header: dict) -> np.ndarray:
    """Point coordinates of a dump, in file order."""
    nx, ny, nz = header["dimensions"]
    o, s = header["origin"], header["spacing"]
    idx = np.arange(nx * ny * nz)
    i, j, l = idx % nx, (idx // nx) % ny, idx // (nx * ny)
    return o + np.stack([i, j, l], axis=1) * s


# -- checkpoints ---------------------------------------------------------------

_STATE_FIELDS = ("u1_half", "w2_half", "u2_int", "w1_int", "P0", "P3", "w2_int")


def save_checkpoint(path, disc: Discretization, state: SimState, last_record: DiagnosticsRecord | None = None) -> Path:
    arrays = {
        "header": np.array([disc.mesh.K, disc.N, state.dt, state.Re, state.k], dtype=float),
        "box": np.stack([disc.mesh.box_min, disc.mesh.box_max]),
    }
    for name in _STATE_FIELDS:
        f = getattr(state, name)
        if f is None:
            continue
        arrays[name] = f.coeffs
        arrays[name + "_t"] = np.array(f.time_tag)
    if last_record is not None:
        arrays["record"] = np.array(json.dumps(last_record.as_row()))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return Path(path)


_KINDS = {"u1_half": "C", "w1_int": "C", "w2_half": "D", "u2_int": "D", "w2_int": "D", "P0": "G", "P3": "S"}


def load_checkpoint(path) -> dict:
    """Returns ``K, N, dt, Re, k, box``, the :class:`SimState` and the last record (if saved)."""
    with np.load(path) as z:
        K, N, dt, Re, k = z["header"]
        kw = {}
        for name in _STATE_FIELDS:
            if name in z:
                kw[name] = Field(SpaceKind(_KINDS[name]), z[name], float(z[name + "_t"]))
        state = SimState(k=int(k), dt=float(dt), Re=float(Re), bootstrapped=True, **kw)
        record = None
        if "record" in z:
            row = json.loads(str(z["record"]))
            names = {f.name for f in fields(DiagnosticsRecord)}
            box = z["box"]
            row["volume"] = float(np.prod(box[1] - box[0]))
            record = DiagnosticsRecord(**{k_: v for k_, v in row.items() if k_ in names})
        box = z["box"]
    return dict(K=int(K), N=int(N), dt=float(dt), Re=float(Re), k=int(k), box=box, state=state, record=record)
