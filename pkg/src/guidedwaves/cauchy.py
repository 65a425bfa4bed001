"""Initial-data recording and retarded reconstruction of wave fields.

The wave field at an interior event is fully determined by (u, du/dt)
on an earlier constant-time hyperplane.  With the retarded propagator
the reconstruction collapses onto the backward light cone's
intersection with that plane, a sphere of radius T = t - t_in, giving
the classical strong-Huygens form

    u(t, x) = <u> + T <du/dr> + T <du/dt>

where <.> is the angular mean over the sphere centered at x and d/dr
the outward radial derivative.  Everything here works on a finite box
of recorded data, so the sphere must fit inside the box; truncation of
the ideally infinite plane is the caller's modeling decision and box
sensitivity is measured, not assumed away.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._numutil import catmull_weights, sha256_of_array, stable_json_dumps
from .errors import ConfigError, DomainError
from .fieldsynth import (
    MASK_CONE_EXIT,
    MASK_NEAR_FIELD,
    MASK_NEAR_SINGULAR,
    MASK_OK,
    evaluate_field_points,
)
from .greens import GreenKind
from .spacetime import Worldline

__all__ = ["CauchyData", "record_cauchy_data", "kirchhoff_reconstruct"]


@dataclass(frozen=True)
class CauchyData:
    """Field and its time derivative on one constant-time plane.

    ``u`` and ``dtu`` live on a uniform 3D box: node (i, j, k) sits at
    ``origin + spacing * (i, j, k)``.  Nodes that could not be evaluated
    hold NaN; ``mask`` keeps the underlying evaluation codes.
    """

    t_in: float
    origin: np.ndarray
    spacing: float
    u: np.ndarray
    dtu: np.ndarray
    mask: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.u.shape != self.dtu.shape or self.u.shape != self.mask.shape:
            raise ConfigError("u, dtu and mask shapes disagree")
        if self.spacing <= 0.0:
            raise ConfigError("grid spacing must be positive")

    @property
    def shape(self):
        return self.u.shape

    def axis(self, d):
        return self.origin[d] + self.spacing * np.arange(self.u.shape[d])

    @property
    def content_hash(self):
        return sha256_of_array(self.u.view(float), self.dtu.view(float))

    # -- persistence -----------------------------------------------------

    def save(self, basepath):
        """Write ``<basepath>.bin`` (u then dtu, little-endian complex128,
        C order) and ``<basepath>.json`` holding everything else."""
        u = np.ascontiguousarray(self.u, dtype="<c16")
        dtu = np.ascontiguousarray(self.dtu, dtype="<c16")
        with open(f"{basepath}.bin", "wb") as fh:
            fh.write(u.tobytes())
            fh.write(dtu.tobytes())
        sidecar = {
            "t_in": self.t_in,
            "origin": [float(v) for v in self.origin],
            "spacing": self.spacing,
            "shape": list(self.u.shape),
            "dtype": "<c16",
            "layout": "u then dtu, C order",
            "mask_nonzero": [
                [int(i) for i in idx] for idx in np.argwhere(self.mask != 0)
            ],
            "mask_codes": [int(c) for c in self.mask[self.mask != 0]],
            "content_hash": self.content_hash,
            "provenance": self.provenance,
        }
        with open(f"{basepath}.json", "w", encoding="ascii") as fh:
            fh.write(stable_json_dumps(sidecar))

    @classmethod
    def load(cls, basepath) -> "CauchyData":
        with open(f"{basepath}.json", encoding="ascii") as fh:
            meta = json.load(fh)
        shape = tuple(meta["shape"])
        count = int(np.prod(shape))
        raw = np.fromfile(f"{basepath}.bin", dtype="<c16", count=2 * count)
        u = raw[:count].reshape(shape).astype(complex)
        dtu = raw[count:].reshape(shape).astype(complex)
        mask = np.zeros(shape, dtype=np.uint8)
        for idx, code in zip(meta["mask_nonzero"], meta["mask_codes"]):
            mask[tuple(idx)] = code
        data = cls(
            t_in=float(meta["t_in"]),
            origin=np.asarray(meta["origin"], dtype=float),
            spacing=float(meta["spacing"]),
            u=u,
            dtu=dtu,
            mask=mask,
            provenance=meta.get("provenance", {}),
        )
        if data.content_hash != meta["content_hash"]:
            raise ConfigError(f"content hash mismatch loading {basepath}")
        return data


def _evaluate(source, t, pts):
    """(values, mask) of the generating field at one time over (n, 3)."""
    if callable(source):
        vals = np.asarray(source(t, pts), dtype=complex)
        return vals, np.zeros(pts.shape[0], dtype=np.uint8)
    w, law, kind = source
    xs = np.concatenate([np.full((pts.shape[0], 1), float(t)), pts], axis=1)
    return evaluate_field_points(w, law, kind, xs)


def record_cauchy_data(
    source,
    t_in,
    origin,
    spacing,
    shape,
    omega0=None,
    deriv_order=4,
):
    """Sample a field and its time derivative on a uniform box at t_in.

    ``source`` is either a callable ``f(t, points(n, 3)) -> complex`` or
    a ``(worldline, law, kind)`` triple evaluated through the cone sum
    with its near-trajectory fallback.  The time derivative comes from a
    centered stencil with step spacing/4; ``deriv_order`` 4 (default,
    five evaluations) or 2.  When ``omega0`` is known (or derivable from
    the law), a grid coarser than 8 points per wavelength is recorded as
    a provenance warning.
    """
    origin = np.asarray(origin, dtype=float)
    shape = tuple(int(n) for n in shape)
    if len(shape) != 3 or len(origin) != 3:
        raise ConfigError("Cauchy data lives on a 3D box")
    axes = [origin[d] + spacing * np.arange(shape[d]) for d in range(3)]
    pts = np.stack(
        np.meshgrid(*axes, indexing="ij"), axis=-1
    ).reshape(-1, 3)

    delta = spacing / 4.0
    if deriv_order == 4:
        offsets = (-2, -1, 1, 2)
        coeffs = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)
    elif deriv_order == 2:
        offsets = (-1, 1)
        coeffs = (-0.5, 0.5)
    else:
        raise ConfigError("deriv_order must be 2 or 4")

    u, mask = _evaluate(source, t_in, pts)
    dtu = np.zeros_like(u)
    for k, c in zip(offsets, coeffs):
        uk, mk = _evaluate(source, t_in + k * delta, pts)
        dtu = dtu + c * uk
        # failure codes win and the first one sticks; among benign codes
        # the near-field label (3) outranks plain OK (0)
        old_bad = (mask == MASK_CONE_EXIT) | (mask == MASK_NEAR_SINGULAR)
        new_bad = (mk == MASK_CONE_EXIT) | (mk == MASK_NEAR_SINGULAR)
        mask = np.where(
            old_bad, mask, np.where(new_bad, mk, np.maximum(mask, mk))
        )
    dtu /= delta

    provenance = {"t_in": float(t_in), "deriv_order": deriv_order}
    if not callable(source):
        w, law, kind = source
        provenance["worldline"] = w.content_hash
        provenance["kind"] = kind.value
        provenance["law"] = law.describe()
        if omega0 is None:
            tau_lo, tau_hi = w.tau_range
            taus = np.linspace(tau_lo, tau_hi, 101)
            omega0 = float(np.max(np.abs(law.dS(taus))))
    if omega0 is not None and omega0 > 0.0:
        ppw = 2.0 * np.pi / omega0 / spacing
        provenance["points_per_wavelength"] = ppw
        if ppw < 8.0:
            msg = f"grid resolves only {ppw:.2f} points per wavelength (< 8)"
            provenance["coarse_warning"] = msg
            warnings.warn(msg)

    bad = (mask != MASK_OK) & (mask != MASK_NEAR_FIELD)
    u = u.copy()
    dtu[bad] = np.nan
    u[bad] = np.nan
    return CauchyData(
        t_in=float(t_in),
        origin=origin,
        spacing=float(spacing),
        u=u.reshape(shape),
        dtu=dtu.reshape(shape),
        mask=mask.reshape(shape),
        provenance=provenance,
    )


def _tricubic(data_arrays, origin, spacing, pts):
    """Catmull-Rom interpolation of 3D grids at points (n, 3).

    All grids share the box geometry; raises DomainError (carrying the
    box the query would need) when any point lacks the 4x4x4 stencil.
    """
    shape = data_arrays[0].shape
    s = (pts - origin) / spacing
    i = np.floor(s).astype(int)
    f = s - i
    lo_ok = np.all(i >= 1, axis=1)
    hi_ok = np.all(i + 2 <= np.array(shape) - 1, axis=1)
    if not np.all(lo_ok & hi_ok):
        need_lo = pts.min(axis=0) - 2.0 * spacing
        need_hi = pts.max(axis=0) + 2.0 * spacing
        raise DomainError(
            "interpolation stencil leaves the recorded box",
            required_box=(need_lo, need_hi),
        )
    wx = catmull_weights(f[:, 0])
    wy = catmull_weights(f[:, 1])
    wz = catmull_weights(f[:, 2])
    # (n, 4, 4, 4) neighborhoods by fancy indexing
    ox = (i[:, 0, None] + np.arange(-1, 3))[:, :, None, None]
    oy = (i[:, 1, None] + np.arange(-1, 3))[:, None, :, None]
    oz = (i[:, 2, None] + np.arange(-1, 3))[:, None, None, :]
    weights = (
        wx[:, :, None, None] * wy[:, None, :, None] * wz[:, None, None, :]
    )
    return [
        np.sum(arr[ox, oy, oz] * weights, axis=(1, 2, 3))
        for arr in data_arrays
    ]


def kirchhoff_reconstruct(data, x, n_theta=64, n_phi=128):
    """Retarded reconstruction of u at event x from plane data.

    ``x`` is a FourVector or length-4 array with x[0] = t > t_in.  The
    angular means run over a product rule: Gauss-Legendre in cos(theta)
    times a uniform azimuth grid, exact for smooth sphere data of
    bandwidth below the rule order.  The radial derivative of the
    recorded u is taken along each ray by a five-point centered stencil
    of the interpolant with step spacing/2.
    """
    if hasattr(x, "as_array"):
        x = x.as_array()
    x = np.asarray(x, dtype=float)
    T = x[0] - data.t_in
    if T <= 0.0:
        raise ConfigError("reconstruction target must lie after t_in")
    center = x[1:]

    nodes, gl_w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    ct = nodes[:, None]
    st = np.sqrt(1.0 - ct**2)
    nu = np.stack(
        [
            np.broadcast_to(st * np.cos(phi)[None, :], (n_theta, n_phi)),
            np.broadcast_to(st * np.sin(phi)[None, :], (n_theta, n_phi)),
            np.broadcast_to(ct, (n_theta, n_phi)),
        ],
        axis=-1,
    ).reshape(-1, 3)

    delta = data.spacing / 2.0
    radii = (T - 2 * delta, T - delta, T, T + delta, T + 2 * delta)
    if radii[0] <= 0.0:
        # target too close to the plane for the radial stencil; collapse
        # to one-sided sampling by shrinking the step
        delta = 0.25 * T
        radii = (T - 2 * delta, T - delta, T, T + delta, T + 2 * delta)
    samples = []
    for r in radii:
        (u_r,) = _tricubic([data.u], data.origin, data.spacing, center + r * nu)
        samples.append(u_r)
    (dtu_s,) = _tricubic([data.dtu], data.origin, data.spacing, center + T * nu)
    u_s = samples[2]
    du_dr = (samples[0] - 8 * samples[1] + 8 * samples[3] - samples[4]) / (
        12.0 * delta
    )

    w2 = (gl_w[:, None] * np.full((1, n_phi), 1.0 / n_phi)).ravel() * 0.5
    mean_u = np.sum(w2 * u_s)
    mean_dr = np.sum(w2 * du_dr)
    mean_dt = np.sum(w2 * dtu_s)
    return mean_u + T * mean_dr + T * mean_dt
