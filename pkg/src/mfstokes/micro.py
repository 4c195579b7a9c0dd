"""Inertial particles in Stokes flow: initial data, drag solve and RK4 stepping.

Units follow ``N R = 1/(6 pi)`` so that ``6 pi R N = 1`` and the scaled drag
``N F_i = V_i - u_i``, where ``u_i`` is the velocity that the other
particles' forces induce at ``X_i`` through the blob kernel.
"""
from dataclasses import dataclass, field

import numpy as np

from .kernel import mobility_matrix, superpose
from .metrics import d_min
from .presets import sample_hard_core

DENSE_LIMIT = 512


class DragSolveError(RuntimeError):
    """The drag fixed point did not reach its tolerance."""


class OverlapError(RuntimeError):
    """Two particles came within ``2R`` of each other."""


def radius_for(n):
    return 1.0 / (6.0 * np.pi * n)


@dataclass(frozen=True)
class MicroState:
    X: np.ndarray
    V: np.ndarray
    R: float
    t: float = 0.0

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float).reshape(-1, 3)
        V = np.ascontiguousarray(self.V, dtype=float).reshape(-1, 3)
        if X.shape != V.shape:
            raise ValueError("X and V differ in shape")
        if abs(len(X) * self.R * 6.0 * np.pi - 1.0) > 1e-12:
            raise ValueError(f"N R must equal 1/(6 pi); got N={len(X)}, R={self.R!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "V", V)

    @property
    def N(self):
        return len(self.X)

    @classmethod
    def from_arrays(cls, X, V, t=0.0):
        X = np.asarray(X, dtype=float).reshape(-1, 3)
        return cls(X, V, radius_for(len(X)), t)


@dataclass(frozen=True)
class ForceSet:
    forces: np.ndarray
    scale: int

    @property
    def nf(self):
        return self.scale * self.forces


@dataclass(frozen=True)
class DragSolveReport:
    iterations: int
    residual: float
    method: str


@dataclass(frozen=True)
class DragConfig:
    """Drag solver settings and the blob-radius rule ``min(kappa N^-1/2, d_min/6)``."""

    tol: float = 1e-12
    max_iter: int = 200
    theta: float = 1.0
    kappa: float = 0.02
    dense_fallback: bool = True


def exclusion_radius(n, excl_factor):
    return excl_factor / np.sqrt(n)


def init_particles(spec, N, seed, max_attempts=None):
    """Hard-core sample of ``N`` particles with ``V_i = w0(X_i)``.

    The exclusion radius is ``excl_factor / sqrt(N)``; it dominates ``8R``
    once ``N >= 5`` at the default factor 0.2.
    """
    if N < 1:
        raise ValueError("need at least one particle")
    rng = np.random.default_rng(seed)
    X = sample_hard_core(spec, N, exclusion_radius(N, spec.excl_factor), rng, max_attempts)
    return MicroState(X, spec.velocity(X), radius_for(N), 0.0)


def blob_radius(state, kappa=0.02, dmin=None):
    """``min(kappa N^-1/2, d_min/6)`` clamped below at ``4R``."""
    if dmin is None:
        dmin = d_min(state.X)
    d = min(kappa / np.sqrt(state.N), dmin / 6.0)
    return max(d, 4.0 * state.R)


def drag_residual(state, d, forces):
    """Max-norm residual of ``F = 6 pi R (V - sum_{j != i} Phi_d F_j)``."""
    F = forces.forces if isinstance(forces, ForceSet) else forces
    G = 6.0 * np.pi * state.R * (state.V - superpose(state.X, state.X, F, d, exclude_self=True))
    return float(np.max(np.linalg.norm(F - G, axis=1))) if len(F) else 0.0


def _check_blob(state, d):
    if not d >= 4.0 * state.R * (1 - 1e-12):
        raise ValueError(f"blob radius {d!r} below 4R = {4 * state.R!r}")
    if state.N > 1:
        dm = d_min(state.X)
        if d > dm / 6.0 * (1 + 1e-12):
            raise ValueError(f"blob radius {d!r} exceeds d_min/6 = {dm / 6!r}")


def _fixed_point(state, d, tol, max_iter, theta):
    c = 6.0 * np.pi * state.R
    F = c * state.V
    previous = np.inf
    for it in range(max_iter + 1):
        G = c * (state.V - superpose(state.X, state.X, F, d, exclude_self=True))
        residual = float(np.max(np.linalg.norm(F - G, axis=1)))
        if residual <= tol:
            return F, DragSolveReport(it, residual, "fixed_point")
        if residual > previous:
            theta *= 0.5
        previous = residual
        F = (1.0 - theta) * F + theta * G
    raise DragSolveError(
        f"drag fixed point stalled at residual {residual:.3e} after {max_iter} iterations"
    )


def _dense(state, d):
    c = 6.0 * np.pi * state.R
    n = state.N
    K = np.eye(3 * n) + c * mobility_matrix(state.X, d, exclude_self=True)
    F = np.linalg.solve(K, c * state.V.ravel()).reshape(n, 3)
    return F, DragSolveReport(1, drag_residual(state, d, F), "dense_direct")


def solve_drag(state, d, tol=1e-12, max_iter=200, method="fixed_point", theta=1.0,
               check=True, dense_fallback=False):
    """Forces ``F_i`` with ``F_i = 6 pi R (V_i - sum_{j != i} oseen_blob(X_i - X_j, d) F_j)``.

    ``method`` is ``fixed_point`` (damped Jacobi started from ``6 pi R V``,
    damping halved whenever the residual grows) or ``dense_direct``.  With
    ``check`` the geometric window ``4R <= d <= d_min/6`` is enforced.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if check:
        _check_blob(state, d)
    if method == "dense_direct":
        F, report = _dense(state, d)
    elif method == "fixed_point":
        try:
            F, report = _fixed_point(state, d, tol, max_iter, theta)
        except DragSolveError:
            if not (dense_fallback and state.N <= DENSE_LIMIT):
                raise
            F, report = _dense(state, d)
    else:
        raise ValueError(f"unknown drag method {method!r}")
    return ForceSet(F, state.N), report


def _accel(state, d, cfg, g):
    forces, _ = solve_drag(
        state, d, cfg.tol, cfg.max_iter, theta=cfg.theta, check=False,
        dense_fallback=cfg.dense_fallback,
    )
    return g - forces.nf


def step(state, dt, d, drag_cfg=DragConfig(), g=(0.0, 0.0, 0.0), forces0=None):
    """One classical RK4 step of ``X' = V, V' = g - N F(X, V)``.

    The drag is re-solved at every stage with the same blob radius ``d``.
    ``forces0`` may carry the already solved forces at ``state``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    g = np.asarray(g, dtype=float)
    X, V, R = state.X, state.V, state.R
    if forces0 is None:
        _check_blob(state, d)
        a1 = _accel(state, d, drag_cfg, g)
    else:
        a1 = g - forces0.nf
    s2 = MicroState(X + 0.5 * dt * V, V + 0.5 * dt * a1, R)
    a2 = _accel(s2, d, drag_cfg, g)
    s3 = MicroState(X + 0.5 * dt * s2.V, V + 0.5 * dt * a2, R)
    a3 = _accel(s3, d, drag_cfg, g)
    s4 = MicroState(X + dt * s3.V, V + dt * a3, R)
    a4 = _accel(s4, d, drag_cfg, g)
    Xn = X + dt / 6.0 * (V + 2.0 * s2.V + 2.0 * s3.V + s4.V)
    Vn = V + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    new = MicroState(Xn, Vn, R, state.t + dt)
    if new.N > 1:
        dm = d_min(Xn)
        if dm <= 2.0 * R:
            raise OverlapError(f"particles overlap at t={new.t:.6g}: d_min={dm:.3e} <= 2R={2 * R:.3e}")
    return new


@dataclass
class MicroStepper:
    """Advances a micro state, re-choosing the blob radius at every step."""

    drag: DragConfig = field(default_factory=DragConfig)
    g: tuple = (0.0, 0.0, 0.0)

    def forces(self, state):
        d = blob_radius(state, self.drag.kappa)
        forces, report = solve_drag(
            state, d, self.drag.tol, self.drag.max_iter, theta=self.drag.theta,
            dense_fallback=self.drag.dense_fallback,
        )
        return d, forces, report

    def advance(self, state, dt, solved=None):
        d, forces, _ = solved if solved is not None else self.forces(state)
        return step(state, dt, d, self.drag, self.g, forces0=forces)
