import numpy as np
import pytest

from guidedwaves.errors import StencilError, SubluminalityError
from guidedwaves.spacetime import (
    ConstantFrequencyLaw,
    TabulatedLaw,
    Worldline,
    boost_matrix,
    minkowski_dot,
)

ETA = np.diag([1.0, -1.0, -1.0, -1.0])


def test_static_worldline_proper_time_is_coordinate_time():
    w = Worldline.static(position=(1.0, -2.0, 0.5), t_span=(-5.0, 5.0))
    for t in (-3.2, 0.0, 1.7):
        lam = w.lam_at_time(t)
        assert abs(w.proper_time(lam) - t) < 1e-12
        assert np.allclose(w.at_time(t), [t, 1.0, -2.0, 0.5])


def test_uniform_worldline_time_dilation():
    v = 0.8
    gamma = 1.0 / np.sqrt(1.0 - v * v)
    w = Worldline.uniform(velocity=(0.0, v, 0.0), t_span=(-10, 10))
    lam = w.lam_at_time(4.0)
    assert abs(w.proper_time(lam) - 4.0 / gamma) < 1e-9


def test_velocity_is_unit_timelike_and_orthogonal_to_acceleration():
    w = Worldline.circular(radius=2.0, speed=0.4, t_span=(-10, 10))
    tau = np.array([-1.3, 0.0, 2.1])
    lam = w.lam_of_tau(tau)
    zdot, zddot, _ = w.derivatives(lam)
    norm = np.einsum("ij,ij->i", zdot, zdot @ ETA)
    ortho = np.einsum("ij,ij->i", zdot, zddot @ ETA)
    assert np.max(np.abs(norm - 1.0)) < 1e-8
    # zdot.zdot = 1 differentiates to zdot.zddot = 0
    assert np.max(np.abs(ortho)) < 1e-8


def test_proper_time_zero_anchored_at_t_zero():
    w = Worldline.uniform(velocity=(0.3, 0.0, 0.0), t_span=(-7.0, 9.0))
    assert abs(w.proper_time(w.lam_at_time(0.0))) < 1e-12


def test_derivatives_near_ends_raise():
    w = Worldline.static(t_span=(0.0, 1.0), n=12)
    with pytest.raises(StencilError):
        w.derivatives(np.array([w.lam[1]]))


def test_superluminal_samples_rejected():
    t = np.linspace(0, 1, 50)
    pts = np.stack([t, 1.2 * t, 0 * t, 0 * t], axis=1)
    with pytest.raises(SubluminalityError):
        Worldline(t, pts)


def test_csv_roundtrip(tmp_path):
    w = Worldline.circular(radius=1.5, speed=0.3, t_span=(-4, 4), n=301)
    path = tmp_path / "w.csv"
    w.to_csv(path)
    back = Worldline.from_csv(path)
    assert np.array_equal(back.lam, w.lam)
    assert np.array_equal(back.points, w.points)


def test_boost_matrix_preserves_metric():
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = rng.uniform(-0.7, 0.7, 3)
        if np.linalg.norm(v) >= 0.95:
            continue
        L = boost_matrix(v)
        assert np.max(np.abs(L.T @ ETA @ L - ETA)) < 1e-12


def test_boost_maps_rest_velocity_to_moving_velocity():
    v = 0.6
    L = boost_matrix((v, 0.0, 0.0))
    gamma = 1.0 / np.sqrt(1.0 - v * v)
    moving = L @ np.array([1.0, 0.0, 0.0, 0.0])
    assert np.allclose(moving, [gamma, gamma * v, 0.0, 0.0])


def test_minkowski_dot_signature():
    a = np.array([2.0, 1.0, 0.0, 0.0])
    assert minkowski_dot(a, a) == pytest.approx(3.0)


def test_constant_frequency_law_phase_slope():
    law = ConstantFrequencyLaw(g0=1.5, omega0=2.0)
    tau = np.linspace(-3, 3, 7)
    assert np.allclose(law.S(tau), -2.0 * tau)
    assert np.allclose(law.dS(tau), -2.0)
    assert np.allclose(law.g(tau), 1.5)
    assert np.allclose(law.dg(tau), 0.0)


def test_law_activity_window():
    law = ConstantFrequencyLaw(g0=1.0, omega0=1.0, tau_on=0.0, tau_off=2.0)
    active = law.active(np.array([-1.0, 0.5, 3.0]))
    assert list(active) == [False, True, False]


def test_tabulated_law_matches_mass_profile():
    """S must accumulate -m(tau) so that dS/dtau = -m."""
    tau = np.linspace(-5, 5, 2001)
    m = 2.0 + 0.1 * np.tanh(tau)
    law = TabulatedLaw.from_mass_profile(tau, m)
    probe = np.linspace(-4, 4, 17)
    assert np.max(np.abs(law.dS(probe) + np.interp(probe, tau, m))) < 1e-6
