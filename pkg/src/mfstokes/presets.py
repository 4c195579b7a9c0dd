"""Initial densities and Lipschitz velocity profiles shared by both simulators."""
from dataclasses import dataclass

import numpy as np

RHO0_PRESETS = ("uniform_ball", "gaussian")
W0_PRESETS = ("constant", "shear", "rotation", "affine")


class SamplingError(RuntimeError):
    """Hard-core rejection sampling ran out of attempts."""


@dataclass(frozen=True)
class InitialDataSpec:
    """Initial density ``rho0``, velocity profile ``w0``, gravity and exclusion factor.

    ``gaussian`` is an isotropic normal of scale ``sigma`` truncated (and
    renormalised) to the ball of radius ``3 sigma``.  Velocity profiles:
    ``constant`` -> c, ``shear`` -> A x, ``rotation`` -> omega x x,
    ``affine`` -> c + A x.  ``A`` is stored row-major as 9 numbers.
    """

    rho0: str = "uniform_ball"
    radius: float = 1.0
    sigma: float = 0.5
    w0: str = "shear"
    c: tuple = (0.0, 0.0, 0.0)
    A: tuple = (0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    omega: tuple = (0.0, 0.0, 1.0)
    g: tuple = (0.0, 0.0, -1.0)
    excl_factor: float = 0.2

    def __post_init__(self):
        if self.rho0 not in RHO0_PRESETS:
            raise ValueError(f"unknown rho0 preset {self.rho0!r}; expected one of {RHO0_PRESETS}")
        if self.w0 not in W0_PRESETS:
            raise ValueError(f"unknown w0 preset {self.w0!r}; expected one of {W0_PRESETS}")
        if self.rho0 == "uniform_ball" and not self.radius > 0:
            raise ValueError("rho0 radius must be positive")
        if self.rho0 == "gaussian" and not self.sigma > 0:
            raise ValueError("rho0 sigma must be positive")
        if not self.excl_factor > 0:
            raise ValueError("excl_factor must be positive")
        for name, size in (("c", 3), ("A", 9), ("omega", 3), ("g", 3)):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != size:
                raise ValueError(f"{name} needs {size} entries, got {len(value)}")
            object.__setattr__(self, name, value)

    @property
    def gravity(self):
        return np.array(self.g)

    @property
    def matrix(self):
        return np.array(self.A).reshape(3, 3)

    @property
    def support_radius(self):
        return self.radius if self.rho0 == "uniform_ball" else 3.0 * self.sigma

    @property
    def support_diameter(self):
        return 2.0 * self.support_radius

    def velocity(self, x):
        """Evaluate ``w0`` at positions of shape ``(n, 3)``."""
        x = np.asarray(x, dtype=float).reshape(-1, 3)
        if self.w0 == "constant":
            return np.broadcast_to(np.array(self.c), x.shape).copy()
        if self.w0 == "shear":
            return x @ self.matrix.T
        if self.w0 == "rotation":
            return np.cross(np.array(self.omega), x)
        return np.array(self.c) + x @ self.matrix.T

    @property
    def lipschitz(self):
        """Exact Lipschitz constant of ``w0``."""
        if self.w0 == "constant":
            return 0.0
        if self.w0 == "rotation":
            return float(np.linalg.norm(self.omega))
        return float(np.linalg.norm(self.matrix, 2))

    def sample(self, n, rng):
        """Draw ``n`` i.i.d. points from ``rho0``."""
        if self.rho0 == "uniform_ball":
            direction = rng.standard_normal((n, 3))
            direction /= np.linalg.norm(direction, axis=1)[:, None]
            r = self.radius * rng.random(n) ** (1.0 / 3.0)
            return direction * r[:, None]
        out = np.empty((0, 3))
        cutoff = 3.0 * self.sigma
        while len(out) < n:
            draw = self.sigma * rng.standard_normal((n, 3))
            keep = np.linalg.norm(draw, axis=1) <= cutoff
            out = np.concatenate([out, draw[keep]])
        return out[:n]


def sample_hard_core(spec, n, r_ex, rng, max_attempts=None):
    """Sequential rejection sampling from ``rho0`` with exclusion radius ``r_ex``.

    Candidates are drawn one at a time (in batches, consumed in order) and
    rejected if closer than ``r_ex`` to an already accepted point.
    """
    if max_attempts is None:
        max_attempts = 100 * n + 1000
    accepted = np.empty((n, 3))
    count = 0
    attempts = 0
    r2 = r_ex * r_ex
    while count < n:
        batch = spec.sample(max(64, n - count), rng)
        for p in batch:
            attempts += 1
            if attempts > max_attempts:
                raise SamplingError(
                    f"hard-core sampling exceeded {max_attempts} attempts with {count}/{n} "
                    f"points accepted; exclusion factor too large for this density"
                )
            if count:
                diff = accepted[:count] - p
                if np.min(np.einsum("ij,ij->i", diff, diff)) < r2:
                    continue
            accepted[count] = p
            count += 1
            if count == n:
                break
    return accepted
