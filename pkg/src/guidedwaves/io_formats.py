"""File formats for grids, field maps, and trajectory ensembles.

Everything written here is reproducible byte for byte: floats are
serialized with ``repr`` (shortest round-trip form), JSON uses sorted
keys, and no timestamps or environment details are embedded.  Binary
payloads are little-endian complex128 in C order, stated again in each
sidecar.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ._numutil import sha256_of_array, stable_json_dumps
from .errors import ConfigError

__all__ = [
    "save_wavefunction_csv",
    "load_wavefunction_csv",
    "save_wavefunction_grid2d",
    "load_wavefunction_grid2d",
    "save_field_grid_csv",
    "save_field_grid_raster",
    "save_ensemble",
    "load_ensemble_index",
]


def _fmt(value):
    return repr(float(value))


# ---------------------------------------------------------------------------
# wavefunction snapshots
# ---------------------------------------------------------------------------


def save_wavefunction_csv(path, x, values):
    """1D snapshot as CSV rows ``x,re,im``."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=complex)
    if x.shape != values.shape:
        raise ConfigError("grid and values disagree in shape")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("x,re,im\n")
        for xi, vi in zip(x, values):
            fh.write(f"{_fmt(xi)},{_fmt(vi.real)},{_fmt(vi.imag)}\n")


def load_wavefunction_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    data = np.atleast_2d(data)
    return data[:, 0], data[:, 1] + 1j * data[:, 2]


def save_wavefunction_grid2d(basepath, values, x0, dx, sidecar_extra=None):
    """2D snapshot: raw little-endian complex128, C order, plus sidecar.

    The sidecar (``<basepath>.json``) records shape, origin, spacing,
    dtype and byte order; the payload is ``<basepath>.bin``.
    """
    values = np.ascontiguousarray(values, dtype="<c16")
    if values.ndim != 2:
        raise ConfigError("expected a 2D array")
    with open(f"{basepath}.bin", "wb") as fh:
        fh.write(values.tobytes())
    meta = {
        "shape": list(values.shape),
        "origin": [float(v) for v in np.atleast_1d(x0)],
        "spacing": float(dx),
        "dtype": "<c16",
        "order": "C",
        "content_hash": sha256_of_array(values.view(float)),
    }
    if sidecar_extra:
        meta.update(sidecar_extra)
    with open(f"{basepath}.json", "w", encoding="ascii") as fh:
        fh.write(stable_json_dumps(meta))


def load_wavefunction_grid2d(basepath):
    with open(f"{basepath}.json", encoding="ascii") as fh:
        meta = json.load(fh)
    shape = tuple(meta["shape"])
    values = np.fromfile(f"{basepath}.bin", dtype="<c16").reshape(shape)
    if sha256_of_array(values.view(float)) != meta["content_hash"]:
        raise ConfigError(f"content hash mismatch loading {basepath}")
    return values.astype(complex), meta


# ---------------------------------------------------------------------------
# field maps
# ---------------------------------------------------------------------------


def save_field_grid_csv(path, grid):
    """FieldGrid as CSV rows ``axis1,axis2,re,im`` (masked nodes: nan)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("axis1,axis2,re,im\n")
        hard = (grid.mask != 0) & (grid.mask != 3)
        for i, a0 in enumerate(grid.axis0):
            for j, a1 in enumerate(grid.axis1):
                if hard[i, j]:
                    fh.write(f"{_fmt(a0)},{_fmt(a1)},nan,nan\n")
                    continue
                v = grid.values[i, j]
                fh.write(f"{_fmt(a0)},{_fmt(a1)},{_fmt(v.real)},{_fmt(v.imag)}\n")


def _raster_bytes(grid, mapping, vmin, vmax):
    re = grid.values.real
    finite = np.isfinite(re)
    if mapping == "linear":
        if vmax is None:
            peak = float(np.max(np.abs(re[finite]))) if np.any(finite) else 1.0
            vmax = peak if peak > 0.0 else 1.0
        if vmin is None:
            vmin = -vmax
        span = vmax - vmin
        norm = (np.clip(re, vmin, vmax) - vmin) / span
    elif mapping == "renormalized":
        mag = np.abs(grid.values)
        with np.errstate(invalid="ignore", divide="ignore"):
            norm = np.where(mag > 0.0, re / mag, 0.0) * 0.5 + 0.5
        vmin, vmax = -1.0, 1.0
    else:
        raise ConfigError(f"unknown raster mapping {mapping!r}")
    norm = np.where(finite, norm, 0.0)
    return np.round(norm * 255.0).astype(np.uint8), float(vmin), float(vmax)


def save_field_grid_raster(
    basepath, grid, mapping="linear", color=False, vmin=None, vmax=None
):
    """FieldGrid as an 8-bit portable pixmap of Re(u), plus sidecar.

    ``mapping`` "linear" sends [vmin, vmax] to [0, 255] (defaults to the
    symmetric range of the unmasked data); "renormalized" sends
    Re(u)/|u| to the same byte range, showing pure phase structure.
    Grayscale output is PGM (P5); with ``color`` a PPM (P6) paints hard
    masked nodes red instead of folding them to black.  Row i of the
    image is axis0[i] and column j is axis1[j].
    """
    shade, lo, hi = _raster_bytes(grid, mapping, vmin, vmax)
    h, w = shade.shape
    bad = (grid.mask != 0) & (grid.mask != 3)
    if color:
        path = f"{basepath}.ppm"
        rgb = np.repeat(shade[:, :, None], 3, axis=2)
        rgb[bad] = (255, 0, 0)
        with open(path, "wb") as fh:
            fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
            fh.write(rgb.tobytes())
    else:
        path = f"{basepath}.pgm"
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(shade.tobytes())
    meta = {
        "image": os.path.basename(path),
        "format": "P6" if color else "P5",
        "mapping": mapping,
        "vmin": lo,
        "vmax": hi,
        "axis_names": list(grid.axis_names),
        "axis0": [float(grid.axis0[0]), float(grid.axis0[-1]), len(grid.axis0)],
        "axis1": [float(grid.axis1[0]), float(grid.axis1[-1]), len(grid.axis1)],
        "fixed": {k: float(v) for k, v in grid.fixed.items()},
        "mask_counts": {str(k): v for k, v in grid.mask_counts.items()},
        "provenance": grid.provenance,
    }
    with open(f"{basepath}.json", "w", encoding="ascii") as fh:
        fh.write(stable_json_dumps(meta))
    return path


# ---------------------------------------------------------------------------
# trajectory ensembles
# ---------------------------------------------------------------------------


def save_ensemble(outdir, ensemble, axis=0, prefix="trajectory"):
    """One worldline-format CSV per trajectory plus ``index.json``.

    Trajectories embed on the chosen spatial axis; node-stalled members
    are truncated at their last finite sample.  The index carries the
    seed, model fingerprint, integrator configuration, per-trajectory
    flags and file names.
    """
    os.makedirs(outdir, exist_ok=True)
    names = []
    width = len(str(len(ensemble) - 1))
    for i in range(len(ensemble)):
        name = f"{prefix}_{i:0{width}d}.csv"
        names.append(name)
        good = np.isfinite(ensemble.positions[i])
        cols = np.zeros((int(np.sum(good)), 3))
        t = ensemble.t[good]
        cols[:, axis] = ensemble.positions[i][good]
        with open(os.path.join(outdir, name), "w", encoding="ascii",
                  newline="\n") as fh:
            fh.write("lambda,t,x,y,z\n")
            for tk, row in zip(t, cols):
                fh.write(
                    f"{_fmt(tk)},{_fmt(tk)},{_fmt(row[0])},"
                    f"{_fmt(row[1])},{_fmt(row[2])}\n"
                )
    index = {
        "n_trajectories": len(ensemble),
        "seed": ensemble.seed,
        "model_fingerprint": ensemble.model_fingerprint,
        "config": ensemble.config,
        "flags": [int(f) for f in ensemble.flags],
        "stall_times": [
            None if not np.isfinite(s) else float(s)
            for s in ensemble.stall_times
        ],
        "t_range": [float(ensemble.t[0]), float(ensemble.t[-1])],
        "axis": int(axis),
        "files": names,
        "stats": ensemble.stats,
    }
    with open(os.path.join(outdir, "index.json"), "w", encoding="ascii") as fh:
        fh.write(stable_json_dumps(index))
    return os.path.join(outdir, "index.json")


def load_ensemble_index(outdir):
    with open(os.path.join(outdir, "index.json"), encoding="ascii") as fh:
        return json.load(fh)
