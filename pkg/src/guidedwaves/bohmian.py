"""Guidance-law trajectory integration and Born-rule ensembles.

The non-relativistic guiding velocity v = (grad S - e A)/m is integrated
with an adaptive Dormand-Prince RK5(4) scheme.  Whole ensembles advance
together: one shared adaptive step, error norm taken as the worst active
trajectory, each trajectory frozen individually if the step collapses at
a wavefunction node.  This keeps the integration independent of how
trajectories are distributed across threads (the step sequence is a pure
function of the ensemble), so results are bit-identical for any thread
count.

Initial positions follow Born's rule via inverse-CDF sampling on a fine
tabulation of |psi|^2, driven by the counter-based Philox generator: the
i-th draw depends only on (master seed, i), never on scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ._numutil import catmull_weights as _catmull_weights
from ._numutil import principal_angle_diff
from .errors import DomainError, NodeError, SuperluminalRegimeError
from .spacetime import Worldline
from .wavefunction import GridWavefunction2D, PolarFields

__all__ = [
    "IntegratorConfig",
    "TrajectoryEnsemble",
    "guidance_velocity_nr",
    "integrate_trajectory",
    "integrate_ensemble",
    "sample_born",
    "integrate_many_body",
    "relativistic_guidance_velocity",
]


# Dormand-Prince 5(4) tableau (FSAL: last stage = first of the next step).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_ERR = _DP_B5 - _DP_B4

FLAG_OK = 0
FLAG_NODE_STALLED = 1


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive-step parameters shared by all trajectory integrators."""

    rtol: float = 1e-8
    atol: float = 1e-8
    dt_init: float = 1e-2
    dt_min: float = 1e-6
    dt_max: float = 0.25
    eps_node_rel: float = 1e-7
    max_steps: int = 1_000_000

    def as_dict(self):
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "dt_init": self.dt_init,
            "dt_min": self.dt_min,
            "dt_max": self.dt_max,
            "eps_node_rel": self.eps_node_rel,
            "max_steps": self.max_steps,
        }


def model_fingerprint(model):
    """Stable hex digest of a model's defining parameters."""
    return hashlib.sha256(repr(model).encode()).hexdigest()


# ---------------------------------------------------------------------------
# guidance velocities
# ---------------------------------------------------------------------------


def guidance_velocity_nr(model, t, x, e_charge=0.0, A_x=0.0, route="ratio",
                         delta=1e-5):
    """Non-relativistic guiding velocity v = (grad S - e A)/m.

    Two independent routes are kept deliberately:

    * ``"ratio"`` - algebraic, Im(dpsi/psi)/m from the model's analytic
      spatial derivative;
    * ``"gradient"`` - a centered principal-value difference of arg(psi)
      over +-``delta``, using no derivative information at all.

    They agree to O(delta^2) and the test suite cross-checks them; the
    integrators use "ratio".
    """
    x = np.asarray(x, dtype=float)
    if route == "ratio":
        grad_s = np.imag(model.dpsi_dx(t, x) / model.psi(t, x))
    elif route == "gradient":
        a_plus = np.angle(model.psi(t, x + delta))
        a_minus = np.angle(model.psi(t, x - delta))
        grad_s = principal_angle_diff(a_plus, a_minus) / (2.0 * delta)
    else:
        raise ValueError(f"unknown route {route!r}")
    return (grad_s - e_charge * A_x) / model.mass


def relativistic_guidance_velocity(fields, A=None, e_charge=0.0):
    """Four-velocity of the relativistic guidance law.

    ``fields`` is a :class:`~guidedwaves.wavefunction.PolarFields` with
    ``dS_t`` populated (or any object with ``dS_t``/``dS`` arrays).  With
    p_mu = d_mu S + e A_mu, the guidance four-velocity is

        zdot^mu = -p^mu / sqrt(p . p)

    so zdot.zdot = 1 by construction and M zdot^mu = -p^mu with the
    varying mass M = sqrt(p.p) = sqrt(m^2 + Q) on exact solutions.
    Raises :class:`SuperluminalRegimeError` where p is not timelike.
    """
    if isinstance(fields, PolarFields) and fields.dS_t is None:
        raise ValueError("relativistic guidance needs dS_t in the fields")
    p_t = np.asarray(fields.dS_t, dtype=float)
    p_x = np.asarray(fields.dS, dtype=float)
    p_y = np.zeros_like(p_x)
    p_z = np.zeros_like(p_x)
    if A is not None:
        a_t, a_x, a_y, a_z = (np.asarray(a, dtype=float) for a in A)
        p_t = p_t + e_charge * a_t
        p_x = p_x + e_charge * a_x
        p_y = p_y + e_charge * a_y
        p_z = p_z + e_charge * a_z
    norm2 = p_t**2 - p_x**2 - p_y**2 - p_z**2
    if np.any(norm2 <= 0.0):
        raise SuperluminalRegimeError(
            f"(dS + eA) turns spacelike: min norm^2 = {float(np.min(norm2)):.3e}"
        )
    m_eff = np.sqrt(norm2)
    # contravariant: raise the spatial index, then flip overall sign
    return np.stack(
        [-p_t / m_eff, p_x / m_eff, p_y / m_eff, p_z / m_eff], axis=-1
    )


# ---------------------------------------------------------------------------
# ensemble integration
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryEnsemble:
    """Uniformly resampled trajectories plus integration provenance.

    Positions are kept as raw (t, x) arrays; :meth:`worldline` converts a
    single trajectory to a full :class:`Worldline` on demand (far-tail
    Born samples of a dispersing packet can move faster than light in the
    non-relativistic law, and Worldline construction rejects those, so
    eager conversion of a whole ensemble would be both wasteful and
    fragile).
    """

    t: np.ndarray
    positions: np.ndarray
    flags: np.ndarray
    stall_times: np.ndarray
    initial_positions: np.ndarray
    seed: int = None
    model_fingerprint: str = ""
    config: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n_stalled(self):
        return int(np.sum(self.flags == FLAG_NODE_STALLED))

    def worldline(self, i, axis=0):
        """Embed trajectory ``i`` on a spatial axis as a Worldline."""
        mask = np.isfinite(self.positions[i])
        t = self.t[mask]
        pts = np.zeros((t.size, 4))
        pts[:, 0] = t
        pts[:, 1 + axis] = self.positions[i][mask]
        return Worldline(t, pts)


def _node_reference(model, t, x_probe):
    """Amplitude scale max|psi| at time t, for the node threshold."""
    return float(np.max(np.abs(model.psi(t, x_probe))))


def integrate_ensemble(model, z0, t0, t1, config=None, n_out=None, seed=None):
    """Advance dz/dt = v(t, z) for a whole ensemble with one shared step.

    The error norm of a trial step is the worst per-trajectory error
    among active members, so the accepted step sequence is deterministic
    regardless of the thread count used by the array backend.  When the
    shared step collapses below ``dt_min``, the trajectories pinning it
    to the node threshold are frozen at their current position, flagged
    node-stalled, and excluded from further advancement; NaN fills their
    remaining samples after the stall time.

    Output is resampled on a uniform time grid by cubic Hermite
    interpolation of the accepted steps (slopes are the FSAL stage
    values, already computed by the stepper).
    """
    config = config or IntegratorConfig()
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    n = z0.size
    direction = 1.0 if t1 >= t0 else -1.0
    span = abs(t1 - t0)
    if span == 0.0:
        raise ValueError("empty integration span")

    # probe lattice for the node threshold, spanning the ensemble
    lo = min(float(np.min(z0)), -1.0) - 8.0
    hi = max(float(np.max(z0)), 1.0) + 8.0
    x_probe = np.linspace(lo, hi, 513)
    ref_cache = {}

    def r_ref(t):
        if t not in ref_cache:
            ref_cache[t] = _node_reference(model, t, x_probe)
        return ref_cache[t]

    def velocity(t, x, active):
        v = np.zeros_like(x)
        if np.any(active):
            xa = x[active]
            psi = model.psi(t, xa)
            v[active] = np.imag(model.dpsi_dx(t, xa) / psi) / model.mass
        return v

    t = float(t0)
    y = z0.copy()
    active = np.ones(n, dtype=bool)
    flags = np.zeros(n, dtype=np.int8)
    stall_times = np.full(n, np.nan)

    # accepted knots for dense output
    knot_t = [t]
    knot_y = [y.copy()]
    k1 = velocity(t, y, active)
    knot_f = [k1.copy()]

    dt = min(config.dt_init, config.dt_max, span)
    n_rejected = 0
    n_steps = 0
    min_r_rel = np.inf

    while (t1 - t) * direction > 1e-14 * span:
        dt = min(dt, abs(t1 - t))
        if n_steps >= config.max_steps:
            raise RuntimeError(f"step budget {config.max_steps} exhausted")

        h = dt * direction
        ks = np.empty((7, n))
        ks[0] = k1
        ok = True
        for i in range(1, 7):
            ti = t + _DP_C[i] * h
            yi = y + h * sum(a * ks[j] for j, a in enumerate(_DP_A[i]))
            psi_i = model.psi(ti, yi[active]) if np.any(active) else np.empty(0)
            r_rel = np.abs(psi_i) / r_ref(ti)
            if r_rel.size:
                min_r_rel = min(min_r_rel, float(np.min(r_rel)))
            if np.any(r_rel < config.eps_node_rel):
                ok = False
                break
            ks[i] = 0.0
            if np.any(active):
                ks[i][active] = np.imag(
                    model.dpsi_dx(ti, yi[active]) / psi_i
                ) / model.mass
        if ok:
            y_new = y + h * np.einsum("s,sn->n", _DP_B5, ks)
            err_vec = h * np.einsum("s,sn->n", _DP_ERR, ks)
            scale = config.atol + config.rtol * np.maximum(np.abs(y), np.abs(y_new))
            with np.errstate(invalid="ignore"):
                err = float(np.max(np.abs(err_vec[active]) / scale[active])) if np.any(active) else 0.0
        else:
            err = np.inf

        if err <= 1.0:
            # freeze is only triggered by step collapse; accepted steps
            # advance every active trajectory together
            t = t + h
            y_frozen = y.copy()
            y = np.where(active, y_new, y_frozen)
            k1 = ks[6].copy()  # FSAL
            k1[~active] = 0.0
            knot_t.append(t)
            knot_y.append(y.copy())
            knot_f.append(k1.copy())
            n_steps += 1
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            dt = min(config.dt_max, dt * factor)
        else:
            n_rejected += 1
            factor = 0.5 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            dt = dt * factor
            if dt < config.dt_min:
                # step collapse: freeze the trajectories hugging a node
                psi_now = model.psi(t, y[active])
                r_rel = np.abs(psi_now) / r_ref(t)
                near = r_rel < max(config.eps_node_rel * 10.0, float(np.min(r_rel)) * 1.001)
                idx = np.flatnonzero(active)[near]
                if idx.size == 0:
                    raise RuntimeError(
                        "step collapsed below dt_min away from any node"
                    )
                flags[idx] = FLAG_NODE_STALLED
                stall_times[idx] = t
                active[idx] = False
                k1[idx] = 0.0
                if not np.any(active):
                    break
                dt = config.dt_min * 10.0

    # uniform resampling by cubic Hermite on the accepted knots
    knot_t = np.asarray(knot_t)
    knot_y = np.asarray(knot_y)
    knot_f = np.asarray(knot_f)
    if n_out is None:
        n_out = max(int(round(span / 0.02)) + 1, 9)
    t_out = np.linspace(t0, t0 + direction * span, n_out)

    # locate each output time in the knot sequence
    if direction > 0:
        seg = np.clip(np.searchsorted(knot_t, t_out, side="right") - 1, 0,
                      knot_t.size - 2)
    else:
        seg = np.clip(np.searchsorted(-knot_t, -t_out, side="right") - 1, 0,
                      knot_t.size - 2)
    h_seg = knot_t[seg + 1] - knot_t[seg]
    s = (t_out - knot_t[seg]) / h_seg
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    pos = (
        h00[:, None] * knot_y[seg]
        + (h10 * h_seg)[:, None] * knot_f[seg]
        + h01[:, None] * knot_y[seg + 1]
        + (h11 * h_seg)[:, None] * knot_f[seg + 1]
    ).T.copy()

    # blank out samples past each stall time
    for i in np.flatnonzero(flags == FLAG_NODE_STALLED):
        past = (t_out - stall_times[i]) * direction > 0
        pos[i, past] = np.nan

    return TrajectoryEnsemble(
        t=t_out,
        positions=pos,
        flags=flags,
        stall_times=stall_times,
        initial_positions=z0.copy(),
        seed=seed,
        model_fingerprint=model_fingerprint(model),
        config=config.as_dict(),
        stats={
            "accepted_steps": n_steps,
            "rejected_steps": n_rejected,
            "min_amplitude_rel": float(min_r_rel) if np.isfinite(min_r_rel) else None,
        },
    )


def integrate_trajectory(model, z0, t0, t1, tol=1e-8, n_out=None):
    """Single guidance trajectory as a :class:`Worldline` on the x axis."""
    config = IntegratorConfig(rtol=tol, atol=tol)
    ens = integrate_ensemble(model, [z0], t0, t1, config=config, n_out=n_out)
    return ens.worldline(0), ens


def sample_born(model, t0, n, seed, x_range=None, n_tab=65537):
    """Born-rule initial positions by inverse-CDF on a fine tabulation.

    Deterministic for a given (seed, n): draws come from a counter-based
    Philox stream, so sample i is independent of evaluation order.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if x_range is None:
        means = [c[1] for c in model.components]
        sigmas = [c[2] for c in model.components]
        pad = 12.0 * max(sigmas)
        x_range = (min(means) - pad, max(means) + pad)
    x = np.linspace(x_range[0], x_range[1], n_tab)
    pdf = np.abs(model.psi(t0, x)) ** 2
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(x))])
    cdf /= cdf[-1]
    u = np.random.Generator(np.random.Philox(seed)).random(n)
    return np.interp(u, cdf, x)


# ---------------------------------------------------------------------------
# two-particle configuration-space guidance
# ---------------------------------------------------------------------------


def _bicubic_point(grid, fx, fy, ix, iy):
    """Catmull-Rom sample of a 2D complex grid at fractional position."""
    wx = _catmull_weights(fx)
    wy = _catmull_weights(fy)
    patch = grid[ix - 1 : ix + 3, iy - 1 : iy + 3]
    return wx @ patch @ wy


def _snapshot_entry(state):
    """(state, dpsi/dx1, dpsi/dx2) with spectral gradients, computed once."""
    n = state.values.shape[0]
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=state.dx)
    f = np.fft.fft2(state.values)
    d1 = np.fft.ifft2(1j * k[:, None] * f)
    d2 = np.fft.ifft2(1j * k[None, :] * f)
    return state, d1, d2


class _SnapshotWindow:
    """Four consecutive 2D snapshots, interpolable in x1, x2 (bicubic)
    and t (cubic Catmull-Rom) on the middle interval."""

    def __init__(self, entries):
        self.entries = entries
        self.t = np.array([e[0].t for e in entries])
        w0 = entries[0][0]
        self.x0 = w0.x0
        self.dx = w0.dx
        self.n = w0.values.shape[0]

    def advanced(self, dt_snap):
        """Slide one snapshot forward; only the new slice pays an FFT."""
        nxt = _snapshot_entry(self.entries[-1][0].split_step(dt_snap))
        return _SnapshotWindow(self.entries[1:] + [nxt])

    def covers(self, t):
        return self.t[1] - 1e-12 <= t <= self.t[2] + 1e-12

    def sample(self, t, x1, x2):
        """(psi, dpsi/dx1, dpsi/dx2) at one configuration point."""
        g1 = (x1 - self.x0) / self.dx
        g2 = (x2 - self.x0) / self.dx
        i1, i2 = int(np.floor(g1)), int(np.floor(g2))
        if not (1 <= i1 < self.n - 2 and 1 <= i2 < self.n - 2):
            raise DomainError(
                f"configuration point ({x1:.3g}, {x2:.3g}) left the grid "
                "interior",
                required_box=(self.x0 + self.dx, self.x0 + self.dx * (self.n - 2)),
            )
        f1, f2 = g1 - i1, g2 - i2
        st = (t - self.t[1]) / (self.t[2] - self.t[1])
        wt = _catmull_weights(st)
        out = []
        for which in range(3):
            vals = np.array(
                [
                    _bicubic_point(
                        e[0].values if which == 0 else e[which], f1, f2, i1, i2
                    )
                    for e in self.entries
                ]
            )
            out.append(wt @ vals)
        return out


def integrate_many_body(initial, z0_pair, t0, t1, config=None, dt_snap=0.005,
                        n_out=None):
    """Synchronized two-particle guidance on a configuration-space grid.

    ``initial`` is a :class:`GridWavefunction2D` at ``t0``.  Both
    particles advance with the same lab time; the velocity of particle j
    is Im(d_j psi / psi)/m at the full configuration point, from bicubic
    space and cubic time interpolation of a sliding four-snapshot window
    (the grid state streams forward; no full time history is stored).

    Returns ``(trajectory array (n_out, 2), t array, info dict)``.
    """
    if t1 <= t0:
        raise ValueError("many-body integration requires t1 > t0")
    config = config or IntegratorConfig()
    plus = initial.split_step(dt_snap)
    window = _SnapshotWindow(
        [
            _snapshot_entry(initial.split_step(-dt_snap)),
            _snapshot_entry(initial),
            _snapshot_entry(plus),
            _snapshot_entry(plus.split_step(dt_snap)),
        ]
    )

    r_ref = float(np.max(np.abs(initial.values)))
    mass = initial.mass

    def velocity(t, y):
        psi, d1, d2 = window.sample(t, y[0], y[1])
        if abs(psi) < config.eps_node_rel * r_ref:
            raise NodeError(f"node reached at t={t:.6g}")
        return np.array(
            [np.imag(d1 / psi) / mass, np.imag(d2 / psi) / mass]
        )

    t = float(t0)
    y = np.asarray(z0_pair, dtype=float).copy()
    knot_t, knot_y, knot_f = [t], [y.copy()], []
    k1 = velocity(t, y)
    knot_f.append(k1.copy())
    dt = min(config.dt_init, dt_snap)
    stalled = False
    n_steps = n_rejected = 0

    while t < t1 - 1e-12 * (t1 - t0):
        while not window.covers(min(t + dt, t1)) and window.t[2] < t1:
            window = window.advanced(dt_snap)
        dt = min(dt, t1 - t, window.t[2] - t if window.t[2] > t else dt_snap)
        ks = [k1]
        try:
            for i in range(1, 7):
                ti = t + _DP_C[i] * dt
                yi = y + dt * sum(a * ks[j] for j, a in enumerate(_DP_A[i]))
                ks.append(velocity(ti, yi))
        except NodeError:
            dt *= 0.5
            n_rejected += 1
            if dt < config.dt_min:
                stalled = True
                break
            continue
        ks = np.asarray(ks)
        y_new = y + dt * _DP_B5 @ ks
        err_vec = dt * _DP_ERR @ ks
        scale = config.atol + config.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            t += dt
            y = y_new
            k1 = ks[6]
            knot_t.append(t)
            knot_y.append(y.copy())
            knot_f.append(k1.copy())
            n_steps += 1
            dt = min(dt_snap, dt * (5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))))
        else:
            n_rejected += 1
            dt *= max(0.2, 0.9 * err**-0.2)
            if dt < config.dt_min:
                stalled = True
                break

    knot_t = np.asarray(knot_t)
    knot_y = np.asarray(knot_y)
    knot_f = np.asarray(knot_f)
    if n_out is None:
        n_out = max(int(round((knot_t[-1] - t0) / 0.02)) + 1, 9)
    t_out = np.linspace(t0, knot_t[-1], n_out)
    seg = np.clip(np.searchsorted(knot_t, t_out, side="right") - 1, 0,
                  knot_t.size - 2)
    h_seg = (knot_t[seg + 1] - knot_t[seg])[:, None]
    s = ((t_out - knot_t[seg])[:, None]) / h_seg
    traj = (
        (1 + 2 * s) * (1 - s) ** 2 * knot_y[seg]
        + s * (1 - s) ** 2 * h_seg * knot_f[seg]
        + s**2 * (3 - 2 * s) * knot_y[seg + 1]
        + s**2 * (s - 1) * h_seg * knot_f[seg + 1]
    )
    info = {
        "accepted_steps": n_steps,
        "rejected_steps": n_rejected,
        "node_stalled": stalled,
        "t_end": float(knot_t[-1]),
    }
    return traj, t_out, info
