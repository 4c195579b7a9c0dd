"""Diagnostics: interaction sums, minimal distance, velocity norms, buckling, W2."""
from dataclasses import asdict, dataclass, fields

import numpy as np
from numba import njit, prange
from scipy import optimize, sparse
from scipy.special import logsumexp


@njit(cache=True, parallel=True)
def _pair_sums(X, betas):
    n = X.shape[0]
    nb = betas.shape[0]
    sums = np.zeros((n, nb))
    closest = np.empty(n)
    for i in prange(n):
        best = np.inf
        for j in range(n):
            if j == i:
                continue
            rx = X[i, 0] - X[j, 0]
            ry = X[i, 1] - X[j, 1]
            rz = X[i, 2] - X[j, 2]
            s2 = rx * rx + ry * ry + rz * rz
            if s2 < best:
                best = s2
            for b in range(nb):
                sums[i, b] += s2 ** (-0.5 * betas[b])
        closest[i] = np.sqrt(best)
    return sums, closest


def _positions(X):
    return np.ascontiguousarray(X, dtype=float).reshape(-1, 3)


def s_beta(X, beta):
    """``max_i sum_{j != i} |X_i - X_j|^-beta``; zero for a single point."""
    X = _positions(X)
    if len(X) < 2:
        return 0.0
    sums, closest = _pair_sums(X, np.array([float(beta)]))
    if closest.min() == 0.0:
        raise ValueError("coincident points: S_beta is infinite")
    return float(sums[:, 0].max())


def s_betas(X, betas=(2.0, 4.0, 6.0)):
    """Several ``S_beta`` and ``d_min`` from a single pass over the pairs."""
    X = _positions(X)
    if len(X) < 2:
        return [0.0] * len(betas), np.inf
    sums, closest = _pair_sums(X, np.array(betas, dtype=float))
    dmin = float(closest.min())
    if dmin == 0.0:
        raise ValueError("coincident points: S_beta is infinite")
    return [float(v) for v in sums.max(axis=0)], dmin


def d_min(X):
    """Minimal pairwise distance (``inf`` for fewer than two points)."""
    X = _positions(X)
    if len(X) < 2:
        return np.inf
    _, closest = _pair_sums(X, np.empty(0))
    return float(closest.min())


def v_norm(V, p=2):
    """``|V|_2 = sqrt(sum |V_i|^2)`` or ``|V|_inf = max |V_i|``."""
    mags = np.linalg.norm(np.asarray(V, dtype=float).reshape(-1, 3), axis=1)
    if p == 2:
        return float(np.sqrt(np.sum(mags**2)))
    if p in ("inf", np.inf):
        return float(mags.max()) if len(mags) else 0.0
    raise ValueError(f"unsupported norm {p!r}")


def buckling(state, forces):
    """``|NF|_inf + |V|_inf + S_2/N`` for a micro state and its solved forces."""
    nf_inf = v_norm(forces.nf, np.inf)
    return nf_inf + v_norm(state.V, np.inf) + s_beta(state.X, 2.0) / state.N


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    n: int
    d_min: float
    s2_over_n: float
    s4: float
    s6: float
    v_inf: float
    v2: float
    nf_inf: float
    buckling: float
    lipschitz_proxy: float = float("nan")

    @property
    def v2_over_sqrt_n(self):
        return self.v2 / np.sqrt(self.n)

    def as_dict(self):
        return asdict(self)


def record_from(t, X, V, NF, lipschitz_proxy=float("nan")):
    """Diagnostics for positions ``X``, velocities ``V`` and scaled drags ``NF``.

    ``NF`` is ``N F_i`` for the micro system and ``W_k - u_k`` (drag per unit
    mass) for a Lagrangian cloud.
    """
    n = len(X)
    (s2, s4, s6), dmin = s_betas(X)
    nf_inf = v_norm(NF, np.inf)
    v_inf = v_norm(V, np.inf)
    s2n = s2 / n
    return DiagnosticsRecord(
        t=float(t), n=n, d_min=dmin, s2_over_n=s2n, s4=s4, s6=s6, v_inf=v_inf,
        v2=v_norm(V, 2), nf_inf=nf_inf, buckling=nf_inf + v_inf + s2n,
        lipschitz_proxy=float(lipschitz_proxy),
    )


RECORD_FIELDS = [f.name for f in fields(DiagnosticsRecord)]


# --- Wasserstein-2 -----------------------------------------------------------


class TransportError(ValueError):
    """Invalid transport problem (mass mismatch, size cap)."""


@dataclass(frozen=True)
class TransportResult:
    cost: float
    w2: float
    method: str
    plan_support_size: int
    epsilon: float = float("nan")


def _as_cloud(points, weights):
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if weights is None:
        w = np.full(len(P), 1.0 / len(P))
    else:
        w = np.asarray(weights, dtype=float)
    if len(w) != len(P):
        raise TransportError("weights and points differ in length")
    if abs(w.sum() - 1.0) > 1e-9:
        raise TransportError(f"cloud mass {w.sum()!r} differs from 1")
    if np.any(w < 0):
        raise TransportError("negative weights")
    return P, w


def sq_cost(A, B):
    """Squared Euclidean cost matrix, computed from differences (no expansion)."""
    C = np.zeros((len(A), len(B)))
    for k in range(A.shape[1]):
        diff = A[:, k][:, None] - B[:, k][None, :]
        C += diff * diff
    return C


def _uniform(w, n):
    return np.all(np.abs(w - 1.0 / n) <= 1e-12)


def _exact(C, a, b):
    n, m = C.shape
    if n == m and _uniform(a, n) and _uniform(b, m):
        rows, cols = optimize.linear_sum_assignment(C)
        return float(C[rows, cols].sum() / n), n, "exact"
    # transportation LP: rows sum to a, columns to b
    row_op = sparse.kron(sparse.eye(n), np.ones((1, m)))
    col_op = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A_eq = sparse.vstack([row_op, col_op]).tocsr()
    res = optimize.linprog(
        C.ravel(), A_eq=A_eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs"
    )
    if res.status != 0:
        raise TransportError(f"transport LP failed: {res.message}")
    plan = res.x
    return float(max(res.fun, 0.0)), int(np.count_nonzero(plan > 1e-15)), "exact"


def _sinkhorn_cost(C, a, b, eps, tol=1e-7, max_iter=20000, symmetric=False):
    """Transport cost <P, C> of the entropic plan, log-domain with eps-scaling.

    ``tol`` bounds the L1 error of the first marginal.  ``symmetric`` (for
    ``a == b`` and symmetric ``C``) uses the averaged single-potential update.
    """
    la, lb = np.log(a), np.log(b)
    f = np.zeros(len(a))
    g = np.zeros(len(b))
    e = max(float(C.max()), eps)
    schedule = []
    while e > eps:
        schedule.append(e)
        e *= 0.5
    schedule.append(eps)
    for e in schedule:
        last = e == eps
        for it in range(max_iter if last else 50):
            if symmetric:
                f = 0.5 * (f - e * logsumexp((f[None, :] - C) / e + la[None, :], axis=1))
                g = f
            else:
                f = -e * logsumexp((g[None, :] - C) / e + lb[None, :], axis=1)
                g = -e * logsumexp((f[:, None] - C) / e + la[:, None], axis=0)
            if last and it % 10 == 0:
                logP = (f[:, None] + g[None, :] - C) / e + la[:, None] + lb[None, :]
                if np.abs(np.exp(logsumexp(logP, axis=1)) - a).sum() < tol:
                    break
    logP = (f[:, None] + g[None, :] - C) / eps + la[:, None] + lb[None, :]
    P = np.exp(logP)
    return float(np.sum(P * C)), int(np.count_nonzero(P > 1e-15))


def wasserstein2(A, B, weights_a=None, weights_b=None, method="exact", cap=2048,
                 entropic_fallback=False, epsilon=None):
    """Squared-cost optimal transport between two weighted point clouds.

    ``exact``: optimal assignment for uniform equal-size clouds, the
    transportation LP otherwise; refused above ``cap`` points unless
    ``entropic_fallback``.  ``entropic``: debiased Sinkhorn cost
    ``OT_eps(A,B) - (OT_eps(A,A) + OT_eps(B,B))/2`` where ``OT_eps`` is the
    quadratic cost of the entropic plan, clipped at zero.  The default
    ``epsilon`` is ``1e-3`` times the largest squared cross distance.
    """
    A, a = _as_cloud(A, weights_a)
    B, b = _as_cloud(B, weights_b)
    if A.shape[1] != B.shape[1]:
        raise TransportError("clouds live in different dimensions")
    C = sq_cost(A, B)
    if method == "exact" and max(len(A), len(B)) > cap:
        if not entropic_fallback:
            raise TransportError(
                f"exact transport capped at {cap} points (got {len(A)} x {len(B)}); "
                "enable the entropic fallback"
            )
        method = "entropic"
    if method == "exact":
        cost, support, label = _exact(C, a, b)
        return TransportResult(cost, float(np.sqrt(cost)), label, support)
    if method != "entropic":
        raise ValueError(f"unknown transport method {method!r}")
    eps = float(epsilon) if epsilon else 1e-3 * max(float(C.max()), 1e-300)
    cross, support = _sinkhorn_cost(C, a, b, eps)
    self_a, _ = _sinkhorn_cost(sq_cost(A, A), a, a, eps, symmetric=True)
    self_b, _ = _sinkhorn_cost(sq_cost(B, B), b, b, eps, symmetric=True)
    cost = max(cross - 0.5 * (self_a + self_b), 0.0)
    return TransportResult(cost, float(np.sqrt(cost)), f"entropic({eps:.6g})", support, eps)


def phase_distance(state, cloud, method="exact", space_only=False, **kwargs):
    """W2 between the empirical measure of ``state`` and the weighted cloud.

    Phase points are ``(x, v)`` with the plain sum ``|dx|^2 + |dv|^2`` as cost;
    ``space_only`` compares positions alone.
    """
    if space_only:
        P, Q = state.X, cloud.Y
    else:
        P = np.hstack([state.X, state.V])
        Q = np.hstack([cloud.Y, cloud.W])
    return wasserstein2(P, Q, None, cloud.m, method=method, **kwargs)
