import numpy as np
import pytest

from guidedwaves.errors import NearSingularityError, WorldlineTooShortError
from guidedwaves.greens import (
    GreenKind,
    green_weight,
    lightcone_intersect,
    lightcone_intersect_batch,
)
from guidedwaves.spacetime import Worldline


def _static():
    return Worldline.static(t_span=(-30.0, 30.0), n=601)


def test_static_cone_roots_are_t_minus_plus_r():
    w = _static()
    rng = np.random.default_rng(11)
    xs = np.zeros((64, 4))
    xs[:, 0] = rng.uniform(-5, 5, 64)
    xs[:, 1:] = rng.normal(scale=2.0, size=(64, 3))
    r = np.linalg.norm(xs[:, 1:], axis=1)
    ret = lightcone_intersect_batch(w, xs, GreenKind.RETARDED)
    adv = lightcone_intersect_batch(w, xs, GreenKind.ADVANCED)
    assert np.all(ret["status"] == 0) and np.all(adv["status"] == 0)
    assert np.max(np.abs(ret["lam_star"] - (xs[:, 0] - r))) < 1e-10
    assert np.max(np.abs(adv["lam_star"] - (xs[:, 0] + r))) < 1e-10
    assert np.max(np.abs(ret["rho"] - r)) < 1e-10
    assert np.max(np.abs(adv["rho"] - r)) < 1e-10


def test_uniform_motion_root_matches_quadratic_oracle():
    """Straight-line crossings solve (t-lam)^2 = |x - v lam|^2 exactly."""
    v = np.array([0.5, -0.2, 0.1])
    w = Worldline.uniform(velocity=v, t_span=(-60, 60), n=1201)
    x = np.array([3.0, 1.0, -2.0, 0.5])
    # quadratic coefficients in lam from the cone condition
    a = 1.0 - v @ v
    b = -2.0 * (x[0] - v @ x[1:])
    c = x[0] ** 2 - x[1:] @ x[1:]
    roots = np.sort(np.roots([a, b, c]).real)
    sol_ret = lightcone_intersect(w, x, GreenKind.RETARDED)
    sol_adv = lightcone_intersect(w, x, GreenKind.ADVANCED)
    assert abs(sol_ret.lam_star - roots[0]) < 1e-9
    assert abs(sol_adv.lam_star - roots[1]) < 1e-9
    # rho = zdot . (x - z*) with the +--- metric, positive on both branches
    for sol in (sol_ret, sol_adv):
        d = x - np.concatenate([[sol.lam_star], v * sol.lam_star])
        rho = sol.zdot_star[0] * d[0] - sol.zdot_star[1:] @ d[1:]
        assert abs(sol.rho - abs(rho)) < 1e-9
        assert sol.rho > 0


def test_single_point_agrees_with_batch():
    w = Worldline.circular(radius=1.0, speed=0.4, t_span=(-20, 20))
    x = np.array([2.0, 0.3, 1.4, -0.2])
    got = lightcone_intersect(w, x, GreenKind.RETARDED)
    batch = lightcone_intersect_batch(w, x[None, :], GreenKind.RETARDED)
    assert got.lam_star == batch["lam_star"][0]
    assert got.tau_star == batch["tau_star"][0]
    assert got.rho == batch["rho"][0]


def test_retarded_root_precedes_advanced_root():
    w = Worldline.circular(radius=2.0, speed=0.3, t_span=(-40, 40))
    rng = np.random.default_rng(5)
    xs = np.zeros((32, 4))
    xs[:, 0] = rng.uniform(-10, 10, 32)
    xs[:, 1:] = rng.normal(scale=4.0, size=(32, 3))
    ret = lightcone_intersect_batch(w, xs, GreenKind.RETARDED)
    adv = lightcone_intersect_batch(w, xs, GreenKind.ADVANCED)
    ok = (ret["status"] == 0) & (adv["status"] == 0)
    assert ok.all()
    assert np.all(ret["lam_star"] < xs[ok, 0])
    assert np.all(adv["lam_star"] > xs[ok, 0])


def test_out_of_range_status_and_exception():
    w = Worldline.static(t_span=(0.0, 1.0), n=33)
    far = np.array([0.5, 20.0, 0.0, 0.0])
    res_r = lightcone_intersect_batch(w, far[None, :], GreenKind.RETARDED)
    res_a = lightcone_intersect_batch(w, far[None, :], GreenKind.ADVANCED)
    assert int(res_r["status"][0]) == 1  # root before the sampled range
    assert int(res_a["status"][0]) == 2  # root after it
    assert np.isnan(res_r["lam_star"][0])
    with pytest.raises(WorldlineTooShortError):
        lightcone_intersect(w, far, GreenKind.RETARDED)


def test_antisymmetric_kind_lists_both_branches():
    assert GreenKind.ANTISYMMETRIC.branches == (
        GreenKind.RETARDED,
        GreenKind.ADVANCED,
    )
    assert GreenKind.RETARDED.branches == (GreenKind.RETARDED,)


def test_green_weight_value_and_near_singular_guard():
    w = _static()
    sol = lightcone_intersect(
        w, np.array([0.0, 2.0, 0.0, 0.0]), GreenKind.RETARDED
    )
    assert green_weight(sol) == pytest.approx(1.0 / (8.0 * np.pi))
    tight = lightcone_intersect(
        w, np.array([0.0, 1e-8, 0.0, 0.0]), GreenKind.RETARDED
    )
    with pytest.raises(NearSingularityError):
        green_weight(tight)


def test_tau_star_equals_proper_time_of_root():
    w = Worldline.uniform(velocity=(0.6, 0.0, 0.0), t_span=(-50, 50), n=1001)
    x = np.array([1.0, -2.0, 1.5, 0.0])
    sol = lightcone_intersect(w, x, GreenKind.ADVANCED)
    assert abs(sol.tau_star - w.proper_time(sol.lam_star)) < 1e-10
