"""Monokinetic mean-field suspension model by weighted Lagrangian characteristics.

The cloud carries points ``Y_k`` with velocities ``W_k`` and masses ``m_k``.
The fluid velocity at the points solves the Brinkman-type fixed point

    u_k = sum_j oseen_blob(Y_k - Y_j, delta) m_j (W_j - u_j)

(self term included, it is finite for the blob kernel), and characteristics
follow ``Y' = W, W' = g + u(Y) - W``.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .kernel import mobility_matrix, superpose

log = logging.getLogger(__name__)

DENSE_LIMIT = 512


class FluidSolveError(RuntimeError):
    """The fluid fixed point did not reach its tolerance."""


@dataclass(frozen=True)
class LagrangianCloud:
    Y: np.ndarray
    W: np.ndarray
    m: np.ndarray
    delta: float
    t: float = 0.0

    def __post_init__(self):
        Y = np.ascontiguousarray(self.Y, dtype=float).reshape(-1, 3)
        W = np.ascontiguousarray(self.W, dtype=float).reshape(-1, 3)
        m = np.ascontiguousarray(self.m, dtype=float).reshape(-1)
        if Y.shape != W.shape or len(m) != len(Y):
            raise ValueError("Y, W and m differ in length")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses must be nonnegative and sum to 1, got {m.sum()!r}")
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "m", m)

    @property
    def M(self):
        return len(self.Y)


@dataclass(frozen=True)
class FluidField:
    u_at_points: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class FluidConfig:
    tol: float = 1e-12
    max_iter: int = 200
    theta: float = 1.0
    coupling: bool = True
    dense_fallback: bool = True


@dataclass(frozen=True)
class LipschitzWarning:
    t: float
    value: float
    threshold: float
    kind: str = "lipschitz_threshold_exceeded"


def default_delta(spec, M, delta_factor=0.5):
    """Mollification length ``delta_factor * diam(supp rho0) * M^(-1/3)``."""
    return delta_factor * spec.support_diameter * M ** (-1.0 / 3.0)


def init_cloud(spec, M, seed, mode="iid", delta=None, delta_factor=0.5):
    """Initial cloud, either i.i.d. from ``rho0`` or ``coupled`` to a micro state.

    ``mode`` is ``"iid"`` or a ``MicroState``; in the coupled case the cloud
    sits on the initial particle positions with masses ``1/N``.
    """
    if isinstance(mode, str):
        if mode != "iid":
            raise ValueError(f"unknown cloud mode {mode!r}")
        if M < 1:
            raise ValueError("need at least one point")
        Y = spec.sample(M, np.random.default_rng(seed))
    else:
        if M != mode.N:
            raise ValueError(f"coupled cloud needs M = N = {mode.N}, got {M}")
        Y = mode.X.copy()
    if delta is None:
        delta = default_delta(spec, M, delta_factor)
    return LagrangianCloud(Y, spec.velocity(Y), np.full(M, 1.0 / M), delta, 0.0)


def fluid_operator(cloud, u):
    """Right-hand side ``sum_j Phi_delta(Y_k - Y_j) m_j (W_j - u_j)``."""
    sources = cloud.m[:, None] * (cloud.W - u)
    return superpose(cloud.Y, cloud.Y, sources, cloud.delta)


def fluid_residual(cloud, u):
    u = np.asarray(u, dtype=float)
    return float(np.max(np.linalg.norm(u - fluid_operator(cloud, u), axis=1)))


def _dense(cloud):
    M = cloud.M
    K = mobility_matrix(cloud.Y, cloud.delta, exclude_self=False)
    K *= np.repeat(cloud.m, 3)[None, :]
    u = np.linalg.solve(np.eye(3 * M) + K, K @ cloud.W.ravel()).reshape(M, 3)
    return FluidField(u, fluid_residual(cloud, u), 1)


def solve_fluid(cloud, tol=1e-12, max_iter=200, theta=1.0, method="fixed_point",
                dense_fallback=False):
    """Fluid velocity at the cloud points by damped fixed point from ``u = 0``."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if method == "dense_direct":
        return _dense(cloud)
    if method != "fixed_point":
        raise ValueError(f"unknown fluid method {method!r}")
    u = np.zeros_like(cloud.W)
    previous = np.inf
    for it in range(max_iter + 1):
        Tu = fluid_operator(cloud, u)
        residual = float(np.max(np.linalg.norm(u - Tu, axis=1)))
        if residual <= tol:
            return FluidField(u, residual, it)
        if residual > previous:
            theta *= 0.5
        previous = residual
        u = (1.0 - theta) * u + theta * Tu
    if dense_fallback and cloud.M <= DENSE_LIMIT:
        return _dense(cloud)
    raise FluidSolveError(
        f"fluid fixed point stalled at residual {residual:.3e} after {max_iter} iterations; "
        "delta may be too small for the cloud density"
    )


def _fluid(cloud, cfg):
    if not cfg.coupling:
        return np.zeros_like(cloud.W)
    return solve_fluid(cloud, cfg.tol, cfg.max_iter, cfg.theta,
                       dense_fallback=cfg.dense_fallback).u_at_points


def step_cloud(cloud, dt, g=(0.0, 0.0, 0.0), fluid_cfg=FluidConfig(), u0=None):
    """One RK4 step of ``Y' = W, W' = g + u(Y) - W`` with a fluid solve per stage."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = np.asarray(g, dtype=float)
    Y, W, m, delta = cloud.Y, cloud.W, cloud.m, cloud.delta

    def stage(Ys, Ws):
        c = LagrangianCloud(Ys, Ws, m, delta)
        return g + _fluid(c, fluid_cfg) - Ws

    a1 = g + (_fluid(cloud, fluid_cfg) if u0 is None else u0) - W
    W2 = W + 0.5 * dt * a1
    a2 = stage(Y + 0.5 * dt * W, W2)
    W3 = W + 0.5 * dt * a2
    a3 = stage(Y + 0.5 * dt * W2, W3)
    W4 = W + dt * a3
    a4 = stage(Y + dt * W3, W4)
    Yn = Y + dt / 6.0 * (W + 2.0 * W2 + 2.0 * W3 + W4)
    Wn = W + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return LagrangianCloud(Yn, Wn, m, delta, cloud.t + dt)


def knn_lipschitz(Y, W, k=8):
    """Largest ``|W_a - W_b| / |Y_a - Y_b|`` over each point's ``k`` nearest neighbours."""
    Y = np.asarray(Y, dtype=float)
    W = np.asarray(W, dtype=float)
    if len(Y) < 2:
        raise ValueError("need at least two points")
    k = min(k, len(Y) - 1)
    dist, idx = cKDTree(Y).query(Y, k=k + 1)
    dist, idx = dist[:, 1:], idx[:, 1:]
    dw = np.linalg.norm(W[:, None, :] - W[idx], axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(dist > 0, dw / dist, np.where(dw > 0, np.inf, 0.0))
    return float(q.max())


def lipschitz_monitor(cloud, k=8):
    """Nearest-neighbour proxy for the Lipschitz seminorm of the cloud velocity."""
    return knn_lipschitz(cloud.Y, cloud.W, k)


def check_lipschitz(cloud, threshold, k=8):
    """Return (and log) a warning record when the monitor exceeds ``threshold``."""
    value = lipschitz_monitor(cloud, k)
    if value > threshold:
        warning = LipschitzWarning(cloud.t, value, threshold)
        log.warning("lipschitz monitor %.4g above %.4g at t=%.4g", value, threshold, cloud.t)
        return warning
    return None
