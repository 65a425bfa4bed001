"""Small shared numerical helpers."""

import hashlib
import json

import numpy as np

# 5-point Gauss-Legendre rule on [-1, 1]; exact through degree 9.
GAUSS5_NODES, GAUSS5_WEIGHTS = np.polynomial.legendre.leggauss(5)


def fornberg_weights(x0, grid, max_order):
    """Finite-difference weights on an arbitrary 1D stencil.

    Returns an array ``w`` of shape ``(max_order + 1, len(grid))`` such that
    ``w[m] @ f(grid)`` approximates the m-th derivative of ``f`` at ``x0``.
    Classic recursive construction (Fornberg 1988); exact for polynomials of
    degree ``len(grid) - 1``.
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size
    w = np.zeros((max_order + 1, n))
    c1 = 1.0
    c4 = grid[0] - x0
    w[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, max_order)
        c2 = 1.0
        c5 = c4
        c4 = grid[i] - x0
        for j in range(i):
            c3 = grid[i] - grid[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = ((c4 * w[k, j]) - k * w[k - 1, j]) / c3
            w[0, j] = c4 * w[0, j] / c3
        c1 = c2
    return w


def catmull_weights(s):
    """Cubic Catmull-Rom weights of the four neighbors around fraction s.

    The last axis of the result indexes the neighbors at offsets
    (-1, 0, 1, 2) from the cell's lower node; s may be any shape.
    """
    s = np.asarray(s, dtype=float)
    s2, s3 = s * s, s * s * s
    return np.stack(
        [
            -0.5 * s3 + s2 - 0.5 * s,
            1.5 * s3 - 2.5 * s2 + 1.0,
            -1.5 * s3 + 2.0 * s2 + 0.5 * s,
            0.5 * s3 - 0.5 * s2,
        ],
        axis=-1,
    )


def stable_json_dumps(obj):
    """Serialize with sorted keys and no whitespace jitter (byte-stable)."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def sha256_of_array(*arrays):
    """Content hash of one or more float arrays (shape- and byte-exact)."""
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.shape).encode())
        h.update(str(a.dtype).encode())
        h.update(a.tobytes())
    return h.hexdigest()


def principal_angle_diff(a, b):
    """Shortest signed angular difference a - b, in (-pi, pi]."""
    d = np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b))))
    return d
