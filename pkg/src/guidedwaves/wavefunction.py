"""Wavefunction models psi = R exp(iS) and their polar guidance fields.

Analytic models (:class:`GaussianSuperposition`, :class:`PlaneWave1D`)
expose exact spatial and temporal derivatives; :class:`GridWavefunction1D`
and :class:`GridWavefunction2D` are periodic lattices advanced by Strang
split-step spectral propagation.  :func:`polar_decompose` turns either
kind into :class:`PolarFields` (amplitude, unwrapped phase, gradients,
quantum potential, current) for the guidance laws.

Phase convention: all models here evolve under i dpsi/dt = -psi''/(2m)
+ V psi, i.e. *without* the rest-mass rotation exp(-i m t).  Consumers
that need a relativistic action along a trajectory re-insert the rest
mass explicitly; the quantum potential is unaffected either way since it
only sees |psi|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._numutil import principal_angle_diff
from .errors import ConfigError, NodeError, SuperluminalRegimeError

__all__ = [
    "GaussianSuperposition",
    "PlaneWave1D",
    "GridWavefunction1D",
    "GridWavefunction2D",
    "PolarFields",
    "double_slit_model",
    "unwrap_phase",
    "polar_decompose",
    "quantum_potential",
    "quantum_potential_relativistic",
    "effective_mass",
    "probability_current",
    "continuity_residual",
]

EPS_NODE_DEFAULT = 1e-12


# ---------------------------------------------------------------------------
# analytic models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianSuperposition:
    """Weighted free Gaussian packets in one dimension.

    ``components`` is a sequence of ``(weight, mean, sigma0, velocity)``
    with complex weight, |psi|^2 position stddev ``sigma0`` at t=0 and
    group velocity ``velocity``.  The exact free evolution of one
    normalized component is

        psi(x, t) = A sigma0 / sqrt(beta) * exp(b^2/(4 beta) - sigma0^2 k0^2)

    with A = (2 pi sigma0^2)^(-1/4), beta = sigma0^2 + i t/(2m),
    b = 2 sigma0^2 k0 + i (x - mean), k0 = m * velocity.  At t=0 this
    reduces to A exp(i k0 (x - mean) - (x - mean)^2 / (4 sigma0^2)); the
    spread grows as sigma(t) = sigma0 sqrt(1 + (t/(2 m sigma0^2))^2).
    """

    components: tuple
    mass: float = 1.0

    dimension = 1

    def __post_init__(self):
        comps = tuple(
            (complex(w), float(mu), float(s0), float(v))
            for (w, mu, s0, v) in self.components
        )
        if not comps:
            raise ConfigError("need at least one Gaussian component")
        if any(s0 <= 0.0 for (_, _, s0, _) in comps):
            raise ConfigError("sigma0 must be positive")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, mean=0.0, sigma0=1.0, v=0.0, mass=1.0):
        return cls(((1.0, mean, sigma0, v),), mass)

    @cached_property
    def norm(self):
        """Total L2 norm from closed-form pairwise Gaussian overlaps.

        The free evolution is unitary, so the t=0 value holds for all t.
        """
        total = 0.0j
        for wj, mj, sj, vj in self.components:
            for wk, mk, sk, vk in self.components:
                kj, kk = self.mass * vj, self.mass * vk
                amp = (2.0 * np.pi * sj**2) ** (-0.25) * (
                    2.0 * np.pi * sk**2
                ) ** (-0.25)
                # integral of exp(-a x^2 + b x + c), Re(a) > 0
                a = 0.25 / sj**2 + 0.25 / sk**2
                b = 0.5 * mj / sj**2 + 0.5 * mk / sk**2 + 1j * (kk - kj)
                c = (
                    -0.25 * mj**2 / sj**2
                    - 0.25 * mk**2 / sk**2
                    + 1j * (kj * mj - kk * mk)
                )
                total += (
                    np.conj(wj)
                    * wk
                    * amp
                    * np.sqrt(np.pi / a)
                    * np.exp(b**2 / (4 * a) + c)
                )
        return float(np.sqrt(np.real(total)))

    def sigma_t(self, t, k=0):
        s0 = self.components[k][2]
        return s0 * np.sqrt(1.0 + (t / (2.0 * self.mass * s0**2)) ** 2)

    def _terms(self, t, x):
        """Yield (psi_k, g_k, gamma_k): psi' = g psi, dg/dx = gamma."""
        x = np.asarray(x, dtype=float)
        for w, mean, s0, v in self.components:
            k0 = self.mass * v
            amp = (2.0 * np.pi * s0**2) ** (-0.25)
            beta = s0**2 + 0.5j * t / self.mass
            b = 2.0 * s0**2 * k0 + 1j * (x - mean)
            psi = w * amp * s0 / np.sqrt(beta) * np.exp(
                b * b / (4.0 * beta) - s0**2 * k0**2
            )
            yield psi, 0.5j * b / beta, -0.5 / beta

    def psi(self, t, x):
        return sum(p for p, _, _ in self._terms(t, x))

    def dpsi_dx(self, t, x):
        return sum(p * g for p, g, _ in self._terms(t, x))

    def d2psi_dx2(self, t, x):
        return sum(p * (g * g + gam) for p, g, gam in self._terms(t, x))

    def d4psi_dx4(self, t, x):
        # exp-of-quadratic: psi'''' = (g^4 + 6 g^2 gamma + 3 gamma^2) psi
        return sum(
            p * (g**4 + 6.0 * g * g * gam + 3.0 * gam * gam)
            for p, g, gam in self._terms(t, x)
        )

    def dpsi_dt(self, t, x):
        # free evolution: i psi_t = -psi_xx / (2m)
        return 0.5j / self.mass * self.d2psi_dx2(t, x)

    def d2psi_dt2(self, t, x):
        return -0.25 / self.mass**2 * self.d4psi_dx4(t, x)


def double_slit_model(separation=8.0, sigma0=1.0, mass=1.0, v=0.0):
    """Symmetric two-packet superposition used by the two-slit scenario."""
    a = 0.5 * separation
    return GaussianSuperposition(
        ((1.0, -a, sigma0, v), (1.0, a, sigma0, -v)), mass
    )


@dataclass(frozen=True)
class PlaneWave1D:
    """Momentum eigenstate exp(i(kx - k^2 t/2m)): R = 1, grad S = k, Q = 0."""

    k: float
    mass: float = 1.0

    def _phase(self, t, x):
        return self.k * np.asarray(x, dtype=float) - self.k**2 * t / (2 * self.mass)

    def psi(self, t, x):
        return np.exp(1j * self._phase(t, x))

    def dpsi_dx(self, t, x):
        return 1j * self.k * self.psi(t, x)

    def d2psi_dx2(self, t, x):
        return -(self.k**2) * self.psi(t, x)

    def d4psi_dx4(self, t, x):
        return self.k**4 * self.psi(t, x)

    def dpsi_dt(self, t, x):
        return -0.5j * self.k**2 / self.mass * self.psi(t, x)

    def d2psi_dt2(self, t, x):
        return -0.25 * self.k**4 / self.mass**2 * self.psi(t, x)


# ---------------------------------------------------------------------------
# grid models (periodic, Strang-split spectral propagation)
# ---------------------------------------------------------------------------


def _check_step(dt, v_max, k_max, mass):
    if abs(dt) * v_max >= 0.1:
        raise ConfigError(
            f"potential phase per step max|V| dt = {abs(dt) * v_max:.3g} "
            "exceeds 0.1; reduce dt"
        )
    phase = k_max**2 * abs(dt) / (2.0 * mass)
    if phase >= np.pi:
        raise ConfigError(
            f"kinetic phase per step at the Nyquist mode is {phase:.3g} "
            ">= pi; reduce dt or refine the grid"
        )


class GridWavefunction1D:
    """Complex amplitudes on a uniform periodic lattice.

    Stepping returns a new instance; existing snapshots stay valid, which
    the windowed many-body integrator relies on.
    """

    def __init__(self, x0, dx, values, mass=1.0, potential=None, t=0.0):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 1:
            raise ValueError("expected 1D values")
        n = values.size
        if n & (n - 1):
            raise ConfigError(f"grid size {n} is not a power of two")
        self.x0 = float(x0)
        self.dx = float(dx)
        self.values = values
        self.mass = float(mass)
        self.t = float(t)
        self.potential = (
            np.zeros(n) if potential is None else np.asarray(potential, dtype=float)
        )
        if self.potential.shape != values.shape:
            raise ValueError("potential shape mismatch")
        self._k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dx)

    @classmethod
    def from_model(cls, model, x0, dx, n, t=0.0, potential=None):
        x = x0 + dx * np.arange(n)
        return cls(x0, dx, model.psi(t, x), mass=model.mass, t=t,
                   potential=potential)

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.values.size)

    def norm(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.dx)

    def split_step(self, dt, steps=1):
        """Advance by ``steps`` Strang-split steps of ``dt``; returns new state."""
        _check_step(dt, float(np.max(np.abs(self.potential))), np.pi / self.dx,
                    self.mass)
        half_v = np.exp(-0.5j * dt * self.potential)
        kin = np.exp(-0.5j * dt * self._k**2 / self.mass)
        psi = self.values
        for _ in range(steps):
            psi = half_v * psi
            psi = np.fft.ifft(kin * np.fft.fft(psi))
            psi = half_v * psi
        return GridWavefunction1D(self.x0, self.dx, psi, mass=self.mass,
                                  potential=self.potential,
                                  t=self.t + dt * steps)


class GridWavefunction2D:
    """Two-particle configuration-space wavefunction on a periodic grid.

    Axis 0 carries the first coordinate, axis 1 the second; both share
    origin, spacing and size.
    """

    def __init__(self, x0, dx, values, mass=1.0, potential=None, t=0.0):
        values = np.asarray(values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("expected square 2D values")
        n = values.shape[0]
        if n & (n - 1):
            raise ConfigError(f"grid size {n} is not a power of two")
        self.x0 = float(x0)
        self.dx = float(dx)
        self.values = values
        self.mass = float(mass)
        self.t = float(t)
        self.potential = (
            np.zeros((n, n))
            if potential is None
            else np.asarray(potential, dtype=float)
        )
        if self.potential.shape != values.shape:
            raise ValueError("potential shape mismatch")
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dx)
        self._k2 = k[:, None] ** 2 + k[None, :] ** 2

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.values.shape[0])

    def norm(self):
        return float(np.sum(np.abs(self.values) ** 2) * self.dx**2)

    def normalized(self):
        return GridWavefunction2D(self.x0, self.dx,
                                  self.values / np.sqrt(self.norm()),
                                  mass=self.mass, potential=self.potential,
                                  t=self.t)

    def split_step(self, dt, steps=1):
        _check_step(dt, float(np.max(np.abs(self.potential))), np.pi / self.dx,
                    self.mass)
        half_v = np.exp(-0.5j * dt * self.potential)
        kin = np.exp(-1j * dt * self._k2 / (2.0 * self.mass))
        psi = self.values
        for _ in range(steps):
            psi = half_v * psi
            psi = np.fft.ifft2(kin * np.fft.fft2(psi))
            psi = half_v * psi
        return GridWavefunction2D(self.x0, self.dx, psi, mass=self.mass,
                                  potential=self.potential,
                                  t=self.t + dt * steps)


# ---------------------------------------------------------------------------
# polar decomposition psi = R exp(iS) and derived fields
# ---------------------------------------------------------------------------


@dataclass
class PolarFields:
    """Amplitude/phase fields along a 1D query path.

    ``S`` is unwrapped along the path; ``dS``/``dR`` are spatial
    derivatives, ``dS_t`` the time derivative of the phase where the
    source provides one.  ``lap_R`` and ``dtt_R`` feed the two quantum
    potential conventions; grid sources cannot supply ``dtt_R`` from a
    single snapshot, so it may be None there.  ``Q`` defaults to the
    non-relativistic convention and ``J`` to the non-relativistic
    current R^2 [1, dS/m].
    """

    R: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    dR: np.ndarray
    mass: float
    lap_R: np.ndarray = None
    dtt_R: np.ndarray = None
    dS_t: np.ndarray = None
    Q: np.ndarray = field(default=None)
    J: tuple = field(default=None)

    def __post_init__(self):
        if self.Q is None and self.lap_R is not None:
            self.Q = -self.lap_R / (2.0 * self.mass * self.R)
        if self.J is None:
            self.J = (self.R**2, self.R**2 * self.dS / self.mass)


def unwrap_phase(psi_values, eps_node=EPS_NODE_DEFAULT):
    """Continuously unwrapped arg(psi) along a sample path.

    Anchored at the sample of largest |psi|, which makes the result
    independent of traversal direction: the reversed path unwraps to
    exactly the same values with no stray 2 pi n offset.
    """
    psi_values = np.asarray(psi_values, dtype=complex)
    mag = np.abs(psi_values)
    if np.any(mag < eps_node):
        raise NodeError("phase undefined at a node (|psi| < eps) on the path")
    phases = np.angle(psi_values)
    steps = principal_angle_diff(phases[1:], phases[:-1])
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    anchor = int(np.argmax(mag))
    return phases[anchor] + cum - cum[anchor]


def _polar_from_analytic(model, t, x, eps_node):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    psi = model.psi(t, x)
    R = np.abs(psi)
    if np.any(R < eps_node):
        raise NodeError("polar decomposition queried at a node")
    d1 = model.dpsi_dx(t, x)
    d2 = model.d2psi_dx2(t, x)
    dt1 = model.dpsi_dt(t, x)
    dt2 = model.d2psi_dt2(t, x)
    dS = np.imag(d1 / psi)
    dR = np.real(np.conj(psi) * d1) / R
    lap_R = (np.abs(d1) ** 2 + np.real(np.conj(psi) * d2) - dR**2) / R
    dR_t = np.real(np.conj(psi) * dt1) / R
    dtt_R = (np.abs(dt1) ** 2 + np.real(np.conj(psi) * dt2) - dR_t**2) / R
    return PolarFields(
        R=R,
        S=unwrap_phase(psi, eps_node),
        dS=dS,
        dR=dR,
        mass=model.mass,
        lap_R=lap_R,
        dtt_R=dtt_R,
        dS_t=np.imag(dt1 / psi),
    )


def _polar_from_samples(psi, dx, mass, eps_node):
    psi = np.asarray(psi, dtype=complex)
    R = np.abs(psi)
    if np.any(R < eps_node):
        raise NodeError("polar decomposition undefined at a node")
    # second-order centered differences, periodic in the sample path
    dpsi = (np.roll(psi, -1) - np.roll(psi, 1)) / (2.0 * dx)
    lap_R = (np.roll(R, -1) - 2.0 * R + np.roll(R, 1)) / dx**2
    return PolarFields(
        R=R,
        S=unwrap_phase(psi, eps_node),
        dS=np.imag(dpsi / psi),
        dR=(np.roll(R, -1) - np.roll(R, 1)) / (2.0 * dx),
        mass=mass,
        lap_R=lap_R,
    )


def polar_decompose(source, t=None, x=None, dx=None, mass=None,
                    eps_node=EPS_NODE_DEFAULT):
    """Polar fields of a model, a grid state, or raw samples.

    * analytic model (+ ``t`` and a query path ``x``): all derivatives
      closed-form, both Q conventions available;
    * :class:`GridWavefunction1D` (``x`` ignored, the lattice is the
      path): periodic centered differences;
    * plain complex array of samples (+ ``dx`` and ``mass``).
    """
    if hasattr(source, "d2psi_dx2"):
        if t is None or x is None:
            raise ValueError("analytic source needs t and x")
        return _polar_from_analytic(source, t, x, eps_node)
    if isinstance(source, GridWavefunction1D):
        return _polar_from_samples(source.values, source.dx, source.mass,
                                   eps_node)
    if dx is None or mass is None:
        raise ValueError("raw samples need dx and mass")
    return _polar_from_samples(source, dx, mass, eps_node)


def quantum_potential(fields, relativistic=False):
    """Quantum potential of polar fields.

    Non-relativistic convention: -lap(R)/(2 m R).  Relativistic
    (signature +,-,-,-): (d_tt R - lap R)/R, the variant that feeds the
    varying mass M = sqrt(m^2 + Q).
    """
    if relativistic:
        if fields.dtt_R is None:
            raise ValueError(
                "relativistic Q needs d_tt R; use an analytic source or "
                "quantum_potential_relativistic on a time stack"
            )
        return (fields.dtt_R - fields.lap_R) / fields.R
    return -fields.lap_R / (2.0 * fields.mass * fields.R)


def quantum_potential_relativistic(R_minus, R_0, R_plus, dt, dx):
    """Covariant Q = (d_tt R - lap R)/R from amplitude slices at t-dt, t, t+dt."""
    R_minus, R_0, R_plus = (np.asarray(a, dtype=float) for a in (R_minus, R_0, R_plus))
    d_tt = (R_plus - 2.0 * R_0 + R_minus) / dt**2
    lap = (np.roll(R_0, -1) - 2.0 * R_0 + np.roll(R_0, 1)) / dx**2
    return (d_tt - lap) / R_0


def effective_mass(mass, Q):
    """Varying mass M = sqrt(m^2 + Q) of the relativistic guidance law.

    Where m^2 + Q <= 0 the phase gradient turns spacelike and guidance
    stops being timelike, so this raises
    :class:`SuperluminalRegimeError` instead of returning NaN.
    """
    m2 = mass**2 + np.asarray(Q, dtype=float)
    if np.any(m2 <= 0.0):
        raise SuperluminalRegimeError(
            f"m^2 + Q reaches {float(np.min(m2)):.3e} <= 0"
        )
    return np.sqrt(m2)


def probability_current(fields, A=(0.0, 0.0), e_charge=0.0, relativistic=False):
    """Conserved current (J^t, J^x) of polar fields.

    Non-relativistic: (R^2, R^2 (dS - e A_x)/m), i.e. R^2 [1, v].
    Relativistic contravariant (+,-,-,-): J^mu = -R^2 (d^mu S + e A^mu)/m,
    so a plane wave with S = kx - Et yields (E/m, k/m) R^2.
    """
    r2 = fields.R**2
    A_t, A_x = A
    if relativistic:
        if fields.dS_t is None:
            raise ValueError("relativistic current needs dS_t")
        j_t = -r2 * (fields.dS_t + e_charge * A_t) / fields.mass
        j_x = r2 * (fields.dS - e_charge * A_x) / fields.mass
        return j_t, j_x
    return r2, r2 * (fields.dS - e_charge * A_x) / fields.mass


def continuity_residual(w_prev, w_next, dt):
    """Centered discrete residual of d_t(R^2) + d_x(R^2 dS/m).

    Takes grid snapshots at t - dt and t + dt.  The flux is computed as
    Im(conj(psi) dpsi)/m, which equals R^2 dS/m wherever the phase is
    defined but stays finite through nodes and underflowed tails.  Both
    terms are second-order centered, so the residual vanishes at
    O(dx^2, dt^2) under refinement.
    """

    def flux(w):
        dpsi = (np.roll(w.values, -1) - np.roll(w.values, 1)) / (2.0 * w.dx)
        return np.imag(np.conj(w.values) * dpsi) / w.mass

    d_t = (np.abs(w_next.values) ** 2 - np.abs(w_prev.values) ** 2) / (2.0 * dt)
    mid_flux = 0.5 * (flux(w_prev) + flux(w_next))
    div = (np.roll(mid_flux, -1) - np.roll(mid_flux, 1)) / (2.0 * w_prev.dx)
    return d_t + div
