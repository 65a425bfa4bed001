"""Minkowski four-vectors and sampled timelike worldlines.

Conventions used throughout the package: metric signature (+, -, -, -),
natural units c = hbar = 1, coordinates ordered (t, x, y, z).

A :class:`Worldline` is a discretely sampled timelike path ``z(lambda)``
with a cubic-spline interpolant, a cached proper-time table, and cached
proper-time derivatives ``zdot``, ``zddot``, ``zdddot`` per sample.  The
parameter ``lambda`` is arbitrary (lab time, proper time, arc angle, ...)
as long as it is strictly monotone and ``t(lambda)`` strictly increases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._numutil import (
    GAUSS5_NODES,
    GAUSS5_WEIGHTS,
    fornberg_weights,
    sha256_of_array,
)
from .errors import (
    StencilError,
    SubluminalityError,
    WorldlineRangeError,
)

__all__ = [
    "FourVector",
    "Worldline",
    "SourceLaw",
    "ConstantFrequencyLaw",
    "TabulatedLaw",
    "minkowski_dot",
    "minkowski_norm2",
    "boost_matrix",
]


def minkowski_dot(a, b):
    """Minkowski inner product a.b with signature (+, -, -, -).

    Accepts arrays of shape (..., 4); broadcasts like ``a * b``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] - np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def minkowski_norm2(a):
    """Squared Minkowski norm a.a (positive for timelike vectors)."""
    return minkowski_dot(a, a)


def boost_matrix(velocity):
    """Matrix of the pure Lorentz boost taking the rest frame to one
    moving with ``velocity`` (3-vector, |v| < 1): x_lab = B @ x_rest."""
    v = np.asarray(velocity, dtype=float).reshape(3)
    v2 = float(v @ v)
    if v2 >= 1.0:
        raise SubluminalityError(f"|v| = {np.sqrt(v2):.6f} >= 1")
    B = np.eye(4)
    if v2 == 0.0:
        return B
    gamma = 1.0 / np.sqrt(1.0 - v2)
    B[0, 0] = gamma
    B[0, 1:] = B[1:, 0] = gamma * v
    B[1:, 1:] += (gamma - 1.0) * np.outer(v, v) / v2
    return B


@dataclass(frozen=True)
class FourVector:
    """Spacetime event or four-vector (t, x, y, z)."""

    t: float
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "FourVector":
        t, x, y, z = np.asarray(arr, dtype=float)
        return cls(t, x, y, z)

    @property
    def spatial(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def dot(self, other: "FourVector") -> float:
        return float(minkowski_dot(self.as_array(), other.as_array()))

    def __add__(self, other):
        return FourVector.from_array(self.as_array() + other.as_array())

    def __sub__(self, other):
        return FourVector.from_array(self.as_array() - other.as_array())

    def __mul__(self, s):
        return FourVector.from_array(self.as_array() * float(s))

    __rmul__ = __mul__


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 4:
        raise ValueError(f"expected samples of shape (N, 4), got {pts.shape}")
    return pts


class Worldline:
    """Timelike path from discrete samples ``(lambda_i, z_i)``.

    Construction validates monotone ``lambda``, strictly increasing ``t``
    and subluminal spline velocity (checked at knots and midpoints).  The
    proper-time table is accumulated with per-interval 5-point Gauss
    quadrature of ``sqrt(z'.z')`` and anchored so that ``tau = 0`` where
    ``t = 0`` when the sampled span covers t = 0 (otherwise at the first
    sample).  Proper-time derivatives per sample come from 5-point
    finite-difference stencils on the sample values; queries between
    samples interpolate those tables.
    """

    MIN_SAMPLES = 5

    def __init__(self, lam, points):
        lam = np.asarray(lam, dtype=float)
        points = _as_points(points)
        if lam.ndim != 1 or lam.size != points.shape[0]:
            raise ValueError("lambda grid and samples disagree in length")
        if lam.size < self.MIN_SAMPLES:
            raise ValueError(
                f"need at least {self.MIN_SAMPLES} samples, got {lam.size}"
            )
        dlam = np.diff(lam)
        if np.any(dlam <= 0):
            raise ValueError("lambda samples must strictly increase")
        if np.any(np.diff(points[:, 0]) <= 0):
            raise SubluminalityError("t(lambda) must strictly increase")

        self.lam = lam
        self.points = points
        self._spline = CubicSpline(lam, points, axis=0, bc_type="not-a-knot")
        self._dspline = self._spline.derivative()

        self._check_timelike()
        self._tau_knots = self._build_tau_table()
        self._deriv_tables = None
        self._deriv_splines = None
        self._hash = None

    # -- constructors ---------------------------------------------------

    @classmethod
    def from_function(cls, fn, lam_values) -> "Worldline":
        """Sample ``fn(lambda) -> (t, x, y, z)`` on a parameter grid."""
        lam_values = np.asarray(lam_values, dtype=float)
        pts = np.array([np.asarray(fn(v), dtype=float) for v in lam_values])
        return cls(lam_values, pts)

    @classmethod
    def static(cls, position=(0.0, 0.0, 0.0), t_span=(-10.0, 10.0), n=401):
        """Source at rest at a fixed spatial position, lambda = t."""
        t = np.linspace(*t_span, n)
        pts = np.zeros((n, 4))
        pts[:, 0] = t
        pts[:, 1:] = np.asarray(position, dtype=float)
        return cls(t, pts)

    @classmethod
    def uniform(cls, velocity=(0.0, 0.0, 0.0), t_span=(-10.0, 10.0), n=401,
                origin=(0.0, 0.0, 0.0)):
        """Constant-velocity motion through ``origin`` at t = 0."""
        v = np.asarray(velocity, dtype=float)
        if v @ v >= 1.0:
            raise SubluminalityError(f"|v| = {np.sqrt(v @ v):.6f} >= 1")
        t = np.linspace(*t_span, n)
        pts = np.zeros((n, 4))
        pts[:, 0] = t
        pts[:, 1:] = np.asarray(origin, dtype=float) + t[:, None] * v
        return cls(t, pts)

    @classmethod
    def circular(cls, radius=1.0, speed=0.5, t_span=(-10.0, 10.0), n=2001,
                 phase=0.0):
        """Circular orbit in the x-y plane, lambda = t."""
        if not 0.0 < speed < 1.0:
            raise SubluminalityError("need 0 < speed < 1")
        omega = speed / radius
        t = np.linspace(*t_span, n)
        pts = np.zeros((n, 4))
        pts[:, 0] = t
        pts[:, 1] = radius * np.cos(omega * t + phase)
        pts[:, 2] = radius * np.sin(omega * t + phase)
        return cls(t, pts)

    # -- validation and tables ------------------------------------------

    def _check_timelike(self):
        probes = np.concatenate([self.lam, 0.5 * (self.lam[:-1] + self.lam[1:])])
        d = self._dspline(probes)
        norm2 = d[:, 0] ** 2 - np.sum(d[:, 1:] ** 2, axis=1)
        if np.any(d[:, 0] <= 0.0) or np.any(norm2 <= 0.0):
            worst = probes[int(np.argmin(norm2))]
            raise SubluminalityError(
                f"worldline not timelike near lambda = {worst:.6g}"
            )

    def _speed(self, lam_pts):
        """d tau / d lambda along the interpolant."""
        d = self._dspline(np.asarray(lam_pts, dtype=float))
        return np.sqrt(d[..., 0] ** 2 - np.sum(d[..., 1:] ** 2, axis=-1))

    def _build_tau_table(self):
        lo = self.lam[:-1]
        hi = self.lam[1:]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * GAUSS5_NODES[None, :]
        speeds = self._speed(nodes.ravel()).reshape(nodes.shape)
        seg = half * (speeds @ GAUSS5_WEIGHTS)
        tau = np.concatenate([[0.0], np.cumsum(seg)])

        t0, t1 = self.points[0, 0], self.points[-1, 0]
        if t0 <= 0.0 <= t1:
            # anchor tau = 0 at the event with t = 0
            lam_z = self._lam_at_time(0.0)
            tau = tau - self._tau_raw(lam_z, tau)
        return tau

    def _lam_at_time(self, t_target):
        """Invert the strictly increasing t(lambda)."""
        tvals = self.points[:, 0]
        if not tvals[0] <= t_target <= tvals[-1]:
            raise WorldlineRangeError(
                f"t = {t_target:g} outside sampled span "
                f"[{tvals[0]:g}, {tvals[-1]:g}]"
            )
        i = int(np.searchsorted(tvals, t_target))
        i = np.clip(i, 1, len(tvals) - 1)
        lo, hi = self.lam[i - 1], self.lam[i]
        for _ in range(80):
            m = 0.5 * (lo + hi)
            if self._spline(m)[0] < t_target:
                lo = m
            else:
                hi = m
            if hi - lo < 1e-15 * max(1.0, abs(hi)):
                break
        return 0.5 * (lo + hi)

    def lam_at_time(self, t_target):
        """Parameter value where the worldline crosses coordinate time t."""
        return float(self._lam_at_time(float(t_target)))

    def at_time(self, t_target):
        """Event z at coordinate time t, shape (4,)."""
        return self._spline(self._lam_at_time(float(t_target)))

    def _tau_raw(self, lam, table):
        """tau at arbitrary lambda given an (unanchored) knot table."""
        lam = np.asarray(lam, dtype=float)
        idx = np.clip(np.searchsorted(self.lam, lam) - 1, 0, len(self.lam) - 2)
        lo = self.lam[idx]
        mid = 0.5 * (lo + lam)
        half = 0.5 * (lam - lo)
        nodes = mid[..., None] + half[..., None] * GAUSS5_NODES
        speeds = self._speed(nodes.reshape(-1)).reshape(nodes.shape)
        part = half * (speeds @ GAUSS5_WEIGHTS)
        return table[idx] + part

    # -- public queries ---------------------------------------------------

    @property
    def lam_range(self):
        return float(self.lam[0]), float(self.lam[-1])

    @property
    def tau_range(self):
        return float(self._tau_knots[0]), float(self._tau_knots[-1])

    @property
    def content_hash(self) -> str:
        if self._hash is None:
            self._hash = sha256_of_array(self.lam, self.points)
        return self._hash

    def _check_range(self, lam):
        lam = np.asarray(lam, dtype=float)
        if np.any(lam < self.lam[0]) or np.any(lam > self.lam[-1]):
            raise WorldlineRangeError(
                f"lambda outside sampled range [{self.lam[0]:g}, {self.lam[-1]:g}]"
            )
        return lam

    def position(self, lam):
        """Interpolated event z(lambda), shape (..., 4)."""
        lam = self._check_range(lam)
        return self._spline(lam)

    def proper_time(self, lam):
        """tau(lambda); anchored as described in the class docstring."""
        lam = self._check_range(lam)
        return self._tau_raw(lam, self._tau_knots)

    def lam_of_tau(self, tau):
        """Inverse of :meth:`proper_time` (Newton on the monotone table)."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < self._tau_knots[0] - 1e-12) or np.any(
            tau > self._tau_knots[-1] + 1e-12
        ):
            raise WorldlineRangeError("tau outside sampled range")
        lam = np.interp(tau, self._tau_knots, self.lam)
        for _ in range(4):
            resid = self._tau_raw(lam, self._tau_knots) - tau
            lam = lam - resid / self._speed(lam)
            lam = np.clip(lam, self.lam[0], self.lam[-1])
        return lam

    # -- proper-time derivatives ------------------------------------------

    def _build_deriv_tables(self):
        n = len(self.lam)
        tau = self._tau_knots
        zdot = np.empty((n, 4))
        zddot = np.empty((n, 4))
        z3 = np.empty((n, 4))
        for i in range(n):
            j = int(np.clip(i, 2, n - 3))
            sl = slice(j - 2, j + 3)
            w = fornberg_weights(tau[i], tau[sl], 3)
            zdot[i] = w[1] @ self.points[sl]
            zddot[i] = w[2] @ self.points[sl]
            z3[i] = w[3] @ self.points[sl]
        self._deriv_tables = (zdot, zddot, z3)
        self._deriv_splines = tuple(
            CubicSpline(self.lam, tbl, axis=0, bc_type="not-a-knot")
            for tbl in self._deriv_tables
        )

    def derivatives(self, lam):
        """Proper-time derivatives (zdot, zddot, zdddot) at lambda.

        Requires lambda at least two samples away from either end (the
        stencil width); raises :class:`StencilError` otherwise.  Along the
        returned values ``zdot . zdot = 1`` and ``zdot . zddot = 0`` up to
        the documented stencil error, O(dtau^2) on the third derivative.
        """
        lam = self._check_range(lam)
        if np.any(lam < self.lam[2]) or np.any(lam > self.lam[-3]):
            raise StencilError(
                "derivative query within two samples of a worldline end"
            )
        if self._deriv_splines is None:
            self._build_deriv_tables()
        d1, d2, d3 = (s(lam) for s in self._deriv_splines)
        return d1, d2, d3

    def velocity(self, lam):
        """Four-velocity zdot(lambda) (unit Minkowski norm)."""
        return self.derivatives(lam)[0]

    # -- kernel packing and serialization ---------------------------------

    def packed(self):
        """Arrays consumed by the cone-intersection kernels.

        Returns ``(lam, coefs, tau_knots)`` where ``coefs`` has shape
        (n_intervals, 4 components, 4 powers), ascending powers of
        ``lambda - lam[i]``.
        """
        c = self._spline.c  # (4 powers desc, n_int, 4 comp)
        coefs = np.ascontiguousarray(c[::-1].transpose(1, 2, 0))
        return self.lam, coefs, self._tau_knots

    def to_csv(self, path):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("lambda,t,x,y,z\n")
            for lam, p in zip(self.lam, self.points):
                row = ",".join(repr(float(v)) for v in (lam, *p))
                fh.write(row + "\n")

    @classmethod
    def from_csv(cls, path) -> "Worldline":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        data = np.atleast_2d(data)
        return cls(data[:, 0], data[:, 1:5])

    def __repr__(self):
        lo, hi = self.lam_range
        return (
            f"Worldline({len(self.lam)} samples, lambda in [{lo:g}, {hi:g}])"
        )


# ---------------------------------------------------------------------------
# source emission laws g(tau), S(tau)
# ---------------------------------------------------------------------------


class SourceLaw:
    """Amplitude and phase with which a worldline emits.

    Subclasses supply ``g(tau) > 0``, the action ``S(tau)`` (radians) and
    their proper-time derivatives.  An optional hard support window
    ``[tau_on, tau_off]`` silences the source outside it: contributions
    from cone intersections there are zero, which is how a switched-on
    source with no past field is modelled.
    """

    tau_on = -np.inf
    tau_off = np.inf

    def g(self, tau):
        raise NotImplementedError

    def dg(self, tau):
        raise NotImplementedError

    def S(self, tau):
        raise NotImplementedError

    def dS(self, tau):
        raise NotImplementedError

    def active(self, tau):
        tau = np.asarray(tau, dtype=float)
        return (tau >= self.tau_on) & (tau <= self.tau_off)

    def describe(self):
        return {"law": type(self).__name__, "tau_on": float(self.tau_on),
                "tau_off": float(self.tau_off)}


@dataclass(frozen=True)
class ConstantFrequencyLaw(SourceLaw):
    """Constant coupling and linear phase S = -omega0 tau.

    With omega0 = m this is the rest-mass action of a free particle; for
    the stationary wavelet omega0 is the field frequency.
    """

    g0: float = 1.0
    omega0: float = 1.0
    tau_on: float = -np.inf
    tau_off: float = np.inf

    def __post_init__(self):
        if self.g0 <= 0.0:
            raise ValueError("coupling g0 must be positive")

    def g(self, tau):
        return np.full_like(np.asarray(tau, dtype=float), self.g0)

    def dg(self, tau):
        return np.zeros_like(np.asarray(tau, dtype=float))

    def S(self, tau):
        return -self.omega0 * np.asarray(tau, dtype=float)

    def dS(self, tau):
        return np.full_like(np.asarray(tau, dtype=float), -self.omega0)

    def describe(self):
        d = super().describe()
        d.update({"g0": self.g0, "omega0": self.omega0})
        return d


class TabulatedLaw(SourceLaw):
    """Spline-interpolated amplitude and phase samples over proper time.

    Queries outside the tabulated range use the spline's natural
    extrapolation; restrict with ``tau_on``/``tau_off`` when that is not
    wanted.
    """

    def __init__(self, tau, g_values, S_values, tau_on=-np.inf, tau_off=np.inf):
        tau = np.asarray(tau, dtype=float)
        g_values = np.asarray(g_values, dtype=float)
        if np.any(g_values <= 0.0):
            raise ValueError("amplitude g(tau) must stay positive")
        self._g = CubicSpline(tau, g_values)
        self._dg = self._g.derivative()
        self._S = CubicSpline(tau, np.asarray(S_values, dtype=float))
        self._dS = self._S.derivative()
        self.tau_on = float(tau_on)
        self.tau_off = float(tau_off)
        self._tau_span = (float(tau[0]), float(tau[-1]))

    @classmethod
    def from_mass_profile(cls, tau, mass_values, g0=1.0, **kw):
        """Action accumulated from a varying mass: S(tau) = -int M dtau.

        This is the Hamilton-Jacobi alternative to the plain rest-mass
        law; M samples typically come from sqrt(m^2 + Q) along a guidance
        trajectory.
        """
        tau = np.asarray(tau, dtype=float)
        s_spline = CubicSpline(tau, np.asarray(mass_values, dtype=float))
        s_vals = -s_spline.antiderivative()(tau)
        # anchor S = 0 at tau = 0 when covered, matching the simple law
        if tau[0] <= 0.0 <= tau[-1]:
            s_vals = s_vals + s_spline.antiderivative()(0.0)
        return cls(tau, np.full_like(tau, float(g0)), s_vals, **kw)

    def g(self, tau):
        return self._g(np.asarray(tau, dtype=float))

    def dg(self, tau):
        return self._dg(np.asarray(tau, dtype=float))

    def S(self, tau):
        return self._S(np.asarray(tau, dtype=float))

    def dS(self, tau):
        return self._dS(np.asarray(tau, dtype=float))

    def describe(self):
        d = super().describe()
        d.update({"tau_span": list(self._tau_span)})
        return d
