"""Batched light-cone intersection solves (the hot inner loop).

For a field point x and a timelike worldline z(lambda) with strictly
increasing t(lambda), the cone condition

    f(lambda) = (x.t - z.t(lambda)) - sign * |x_vec - z_vec(lambda)|

(sign = +1 retarded, -1 advanced) is strictly decreasing, so the root is
unique when it exists.  Both kernel paths bracket it with binary search
over the spline knots and refine with bisection-safeguarded Newton, then
accumulate proper time up to the root with 5-point Gauss quadrature.

Status codes: 0 root found, 1 root precedes the sampled range, 2 root
follows it.
"""

import numpy as np

from ._backend import USE_NUMBA, njit

_G5N = np.polynomial.legendre.leggauss(5)[0]
_G5W = np.polynomial.legendre.leggauss(5)[1]

_F_TOL = 5e-15
_MAX_NEWTON = 80


# ---------------------------------------------------------------------------
# numba path (scalar helpers + prange driver)
# ---------------------------------------------------------------------------

if USE_NUMBA:
    from numba import prange
else:  # pragma: no cover - alias so the module parses without numba
    prange = range


@njit()
def _poly4(coefs, i, dx):
    """Cubic value of all four components on interval i at offset dx."""
    zt = coefs[i, 0, 0] + dx * (
        coefs[i, 0, 1] + dx * (coefs[i, 0, 2] + dx * coefs[i, 0, 3])
    )
    zx = coefs[i, 1, 0] + dx * (
        coefs[i, 1, 1] + dx * (coefs[i, 1, 2] + dx * coefs[i, 1, 3])
    )
    zy = coefs[i, 2, 0] + dx * (
        coefs[i, 2, 1] + dx * (coefs[i, 2, 2] + dx * coefs[i, 2, 3])
    )
    zz = coefs[i, 3, 0] + dx * (
        coefs[i, 3, 1] + dx * (coefs[i, 3, 2] + dx * coefs[i, 3, 3])
    )
    return zt, zx, zy, zz


@njit()
def _dpoly4(coefs, i, dx):
    """Lambda-derivative of all four components on interval i."""
    dzt = coefs[i, 0, 1] + dx * (2.0 * coefs[i, 0, 2] + 3.0 * dx * coefs[i, 0, 3])
    dzx = coefs[i, 1, 1] + dx * (2.0 * coefs[i, 1, 2] + 3.0 * dx * coefs[i, 1, 3])
    dzy = coefs[i, 2, 1] + dx * (2.0 * coefs[i, 2, 2] + 3.0 * dx * coefs[i, 2, 3])
    dzz = coefs[i, 3, 1] + dx * (2.0 * coefs[i, 3, 2] + 3.0 * dx * coefs[i, 3, 3])
    return dzt, dzx, dzy, dzz


@njit()
def _cone_f_knot(lam, coefs, n, k, xt, xx, xy, xz, sign):
    i = k if k < n - 1 else n - 2
    zt, zx, zy, zz = _poly4(coefs, i, lam[k] - lam[i])
    rx = xx - zx
    ry = xy - zy
    rz = xz - zz
    return (xt - zt) - sign * np.sqrt(rx * rx + ry * ry + rz * rz)


@njit()
def _solve_one(lam, coefs, tau_knots, xt, xx, xy, xz, sign, g5n, g5w):
    """Returns (lam_star, tau_star, rho, status) for one field point."""
    n = lam.shape[0]
    scale = max(1.0, abs(xt), abs(xx) + abs(xy) + abs(xz))
    ftol = _F_TOL * scale

    f_lo = _cone_f_knot(lam, coefs, n, 0, xt, xx, xy, xz, sign)
    if f_lo < 0.0:
        return np.nan, np.nan, np.nan, 1
    f_hi = _cone_f_knot(lam, coefs, n, n - 1, xt, xx, xy, xz, sign)
    if f_hi > 0.0:
        return np.nan, np.nan, np.nan, 2

    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _cone_f_knot(lam, coefs, n, mid, xt, xx, xy, xz, sign) >= 0.0:
            lo = mid
        else:
            hi = mid

    a = lam[lo]
    b = lam[hi]
    x = 0.5 * (a + b)
    for _ in range(_MAX_NEWTON):
        dx = x - lam[lo]
        zt, zx, zy, zz = _poly4(coefs, lo, dx)
        rx = xx - zx
        ry = xy - zy
        rz = xz - zz
        dist = np.sqrt(rx * rx + ry * ry + rz * rz)
        fx = (xt - zt) - sign * dist
        if abs(fx) <= ftol or (b - a) <= 4e-16 * max(1.0, abs(a)):
            break
        if fx > 0.0:
            a = x
        else:
            b = x
        dzt, dzx, dzy, dzz = _dpoly4(coefs, lo, dx)
        ddist = 0.0
        if dist > 0.0:
            ddist = -(rx * dzx + ry * dzy + rz * dzz) / dist
        fp = -dzt - sign * ddist
        if fp != 0.0:
            xn = x - fx / fp
        else:
            xn = 0.5 * (a + b)
        if xn <= a or xn >= b:
            xn = 0.5 * (a + b)
        x = xn

    # proper time up to the root: Gauss-5 on [lam[lo], x]
    mid_q = 0.5 * (lam[lo] + x)
    half_q = 0.5 * (x - lam[lo])
    acc = 0.0
    for k in range(5):
        dxg = mid_q + half_q * g5n[k] - lam[lo]
        dzt, dzx, dzy, dzz = _dpoly4(coefs, lo, dxg)
        acc += g5w[k] * np.sqrt(dzt * dzt - dzx * dzx - dzy * dzy - dzz * dzz)
    tau = tau_knots[lo] + half_q * acc

    dxr = x - lam[lo]
    zt, zx, zy, zz = _poly4(coefs, lo, dxr)
    dzt, dzx, dzy, dzz = _dpoly4(coefs, lo, dxr)
    speed = np.sqrt(dzt * dzt - dzx * dzx - dzy * dzy - dzz * dzz)
    rho = abs(
        (xt - zt) * dzt - (xx - zx) * dzx - (xy - zy) * dzy - (xz - zz) * dzz
    ) / speed
    return x, tau, rho, 0


@njit(parallel=True)
def _cone_batch_loop(lam, coefs, tau_knots, xs, sign, g5n, g5w):
    m = xs.shape[0]
    lam_star = np.empty(m)
    tau_star = np.empty(m)
    rho = np.empty(m)
    status = np.zeros(m, dtype=np.int64)
    for p in prange(m):
        ls, ts, rh, st = _solve_one(
            lam, coefs, tau_knots, xs[p, 0], xs[p, 1], xs[p, 2], xs[p, 3],
            sign, g5n, g5w,
        )
        lam_star[p] = ls
        tau_star[p] = ts
        rho[p] = rh
        status[p] = st
    return lam_star, tau_star, rho, status


# ---------------------------------------------------------------------------
# NumPy fallback
# ---------------------------------------------------------------------------


def _horner(coefs, idx, dx, deriv=False):
    """Evaluate the packed cubic (or its lambda-derivative) per point.

    ``coefs``: (n_int, 4, 4); ``idx``: (m,) interval indices; ``dx``: (m,).
    Returns (m, 4) component values.
    """
    c = coefs[idx]  # (m, 4, 4)
    d = dx[:, None]
    if deriv:
        return c[:, :, 1] + d * (2.0 * c[:, :, 2] + 3.0 * d * c[:, :, 3])
    return c[:, :, 0] + d * (c[:, :, 1] + d * (c[:, :, 2] + d * c[:, :, 3]))


def _cone_batch_numpy(lam, coefs, tau_knots, xs, sign):
    n = lam.shape[0]
    m = xs.shape[0]
    xt = xs[:, 0]
    xvec = xs[:, 1:]
    scale = np.maximum(1.0, np.maximum(np.abs(xt), np.sum(np.abs(xvec), axis=1)))
    ftol = _F_TOL * scale

    def f_at(lam_v, idx):
        z = _horner(coefs, idx, lam_v - lam[idx])
        r = xvec - z[:, 1:]
        dist = np.sqrt(np.sum(r * r, axis=1))
        return (xt - z[:, 0]) - sign * dist

    knot_interval = np.minimum(np.arange(n), n - 2)

    f_lo = f_at(np.full(m, lam[0]), np.zeros(m, dtype=np.int64))
    f_hi = f_at(np.full(m, lam[-1]), np.full(m, n - 2, dtype=np.int64))
    status = np.zeros(m, dtype=np.int64)
    status[f_lo < 0.0] = 1
    status[(status == 0) & (f_hi > 0.0)] = 2
    ok = status == 0

    lo = np.zeros(m, dtype=np.int64)
    hi = np.full(m, n - 1, dtype=np.int64)
    while True:
        span = hi - lo
        if not np.any((span > 1) & ok):
            break
        mid = (lo + hi) // 2
        fm = f_at(lam[mid], knot_interval[mid])
        take = fm >= 0.0
        lo = np.where(ok & (span > 1) & take, mid, lo)
        hi = np.where(ok & (span > 1) & ~take, mid, hi)

    a = lam[lo].copy()
    b = lam[np.minimum(lo + 1, n - 1)].copy()
    x = 0.5 * (a + b)
    active = ok.copy()
    for _ in range(_MAX_NEWTON):
        if not np.any(active):
            break
        z = _horner(coefs, lo, x - lam[lo])
        dz = _horner(coefs, lo, x - lam[lo], deriv=True)
        r = xvec - z[:, 1:]
        dist = np.sqrt(np.sum(r * r, axis=1))
        fx = (xt - z[:, 0]) - sign * dist
        done = np.abs(fx) <= ftol
        done |= (b - a) <= 4e-16 * np.maximum(1.0, np.abs(a))
        active &= ~done
        if not np.any(active):
            break
        pos = fx > 0.0
        a = np.where(active & pos, x, a)
        b = np.where(active & ~pos, x, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            ddist = -np.sum(r * dz[:, 1:], axis=1) / np.where(dist > 0, dist, 1.0)
            fp = -dz[:, 0] - sign * ddist
            xn = x - fx / np.where(fp != 0.0, fp, 1.0)
        bad = (fp == 0.0) | (xn <= a) | (xn >= b) | ~np.isfinite(xn)
        xn = np.where(bad, 0.5 * (a + b), xn)
        x = np.where(active, xn, x)

    # proper time up to the root
    mid_q = 0.5 * (lam[lo] + x)
    half_q = 0.5 * (x - lam[lo])
    acc = np.zeros(m)
    for k in range(5):
        lg = mid_q + half_q * _G5N[k]
        dz = _horner(coefs, lo, lg - lam[lo], deriv=True)
        acc += _G5W[k] * np.sqrt(dz[:, 0] ** 2 - np.sum(dz[:, 1:] ** 2, axis=1))
    tau_star = tau_knots[lo] + half_q * acc

    z = _horner(coefs, lo, x - lam[lo])
    dz = _horner(coefs, lo, x - lam[lo], deriv=True)
    speed = np.sqrt(dz[:, 0] ** 2 - np.sum(dz[:, 1:] ** 2, axis=1))
    zdot = dz / speed[:, None]
    diff = xs - z
    rho = np.abs(diff[:, 0] * zdot[:, 0] - np.sum(diff[:, 1:] * zdot[:, 1:], axis=1))

    bad = ~ok
    x = x.copy()
    x[bad] = np.nan
    tau_star[bad] = np.nan
    rho[bad] = np.nan
    return x, tau_star, rho, status


def cone_batch(lam, coefs, tau_knots, xs, sign):
    """Solve the cone condition for a batch of field points.

    Returns ``(lam_star, tau_star, rho, status)``; see module docstring.
    """
    xs = np.ascontiguousarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != 4:
        raise ValueError("expected field points of shape (m, 4)")
    sign = float(sign)
    if USE_NUMBA:
        return _cone_batch_loop(lam, coefs, tau_knots, xs, sign, _G5N, _G5W)
    return _cone_batch_numpy(lam, coefs, tau_knots, xs, sign)
