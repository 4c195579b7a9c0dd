"""Oseen tensor, its uniform-ball average, and direct pairwise summation.

The ball-averaged kernel is evaluated in closed form.  Writing the Oseen
tensor as ``(I*Lap - grad grad) |x| / (8 pi)`` reduces the ball average to
the average of ``|x - y|`` over the ball, which is the radial function

    g(s) = 3d/4 + s^2/(2d) - s^4/(20 d^3)     for s <  d
    g(s) = s + d^2/(5 s)                       for s >= d

so that ``oseen_blob(x, d) = (a(s) I + b(s) xhat xhat) / (8 pi)`` with
``a = g'' + g'/s`` and ``b = g'/s - g''``.  Outside the ball this is the
point kernel plus the ``d^2/5`` Rotne-Prager-like correction; the relative
distance to the point kernel is exactly ``d^2 / (5 s^2)``.
"""
import numpy as np
from numba import njit, prange

EIGHT_PI = 8.0 * np.pi


def oseen(x):
    """Point Oseen tensor ``(I + xhat xhat) / (8 pi |x|)`` at a nonzero 3-vector."""
    x = np.asarray(x, dtype=float)
    s = np.sqrt(x @ x)
    if not s > 0.0:
        raise ValueError("oseen tensor is singular at x = 0")
    xhat = x / s
    return (np.eye(3) + np.outer(xhat, xhat)) / (EIGHT_PI * s)


def blob_coefficients(s, d):
    """Scalar coefficients ``(a, b)`` of the blob kernel at distances ``s``.

    ``oseen_blob = (a I + b xhat xhat) / (8 pi)``.  Works on arrays.
    """
    s = np.asarray(s, dtype=float)
    d = float(d)
    inside = s < d
    s_out = np.where(inside, d, s)
    d2 = d * d
    a_out = 1.0 / s_out + d2 / (5.0 * s_out**3)
    b_out = 1.0 / s_out - 3.0 * d2 / (5.0 * s_out**3)
    a_in = 2.0 / d - 4.0 * s * s / (5.0 * d**3)
    b_in = 2.0 * s * s / (5.0 * d**3)
    return np.where(inside, a_in, a_out), np.where(inside, b_in, b_out)


def oseen_blob(x, d):
    """Oseen tensor averaged over sources uniform in the ball ``B(0, d)``.

    Finite at ``x = 0`` where it equals ``I / (4 pi d)``.  ``x`` may carry
    leading batch dimensions; the result has shape ``x.shape + (3,)``.
    """
    if not d > 0:
        raise ValueError(f"blob radius must be positive, got {d}")
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.sum(x * x, axis=-1))
    a, b = blob_coefficients(s, d)
    safe = np.where(s > 0.0, s, 1.0)
    xhat = x / safe[..., None]
    eye = np.broadcast_to(np.eye(3), x.shape + (3,))
    dyad = xhat[..., :, None] * xhat[..., None, :]
    return (a[..., None, None] * eye + b[..., None, None] * dyad) / EIGHT_PI


@njit(cache=True, inline="always")
def _coeffs(s2, d):
    # a, b of the blob kernel (d > 0) from the squared distance
    s = np.sqrt(s2)
    if s < d:
        d3 = d * d * d
        return 2.0 / d - 0.8 * s2 / d3, 0.4 * s2 / d3, s
    inv = 1.0 / s
    c = d * d * inv * inv * inv
    return inv + 0.2 * c, inv - 0.6 * c, s


@njit(cache=True, parallel=True)
def _superpose(targets, sources, forces, d, exclude_self):
    nt = targets.shape[0]
    ns = sources.shape[0]
    out = np.zeros((nt, 3))
    for k in prange(nt):
        tx = targets[k, 0]
        ty = targets[k, 1]
        tz = targets[k, 2]
        ux = 0.0
        uy = 0.0
        uz = 0.0
        # fixed source order per target -> bit-identical across thread counts
        for j in range(ns):
            if exclude_self and j == k:
                continue
            rx = tx - sources[j, 0]
            ry = ty - sources[j, 1]
            rz = tz - sources[j, 2]
            fx = forces[j, 0]
            fy = forces[j, 1]
            fz = forces[j, 2]
            s2 = rx * rx + ry * ry + rz * rz
            a, b, s = _coeffs(s2, d)
            if s > 0.0:
                proj = b * (rx * fx + ry * fy + rz * fz) / s2
            else:
                proj = 0.0
            ux += a * fx + proj * rx
            uy += a * fy + proj * ry
            uz += a * fz + proj * rz
        out[k, 0] = ux / (8.0 * np.pi)
        out[k, 1] = uy / (8.0 * np.pi)
        out[k, 2] = uz / (8.0 * np.pi)
    return out


def superpose(targets, sources, forces, d, exclude_self=False):
    """Velocity ``sum_j oseen_blob(t_k - x_j, d) f_j`` at every target.

    With ``exclude_self`` the targets are the sources themselves and the
    ``j == k`` term is skipped.
    """
    if not d > 0:
        raise ValueError(f"blob radius must be positive, got {d}")
    targets = np.ascontiguousarray(targets, dtype=float).reshape(-1, 3)
    sources = np.ascontiguousarray(sources, dtype=float).reshape(-1, 3)
    forces = np.ascontiguousarray(forces, dtype=float).reshape(-1, 3)
    if len(sources) != len(forces):
        raise ValueError("sources and forces differ in length")
    if exclude_self and len(targets) != len(sources):
        raise ValueError("exclude_self needs targets identified with sources")
    if len(sources) == 0:
        return np.zeros_like(targets)
    return _superpose(targets, sources, forces, float(d), bool(exclude_self))


def mobility_matrix(X, d, exclude_self=True):
    """Dense ``3N x 3N`` matrix of ``superpose(X, X, ., d, exclude_self)``.

    Meant for oracles and small direct solves.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    n = len(X)
    blocks = oseen_blob(X[:, None, :] - X[None, :, :], d)
    if exclude_self:
        blocks[np.arange(n), np.arange(n)] = 0.0
    return blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)
