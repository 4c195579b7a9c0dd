"""Run orchestration: single micro and meso runs, the N-sweep study, rate fits.

Per-run random streams come from a counter scheme on the master seed:
``SeedSequence([master, N, replicate]).generate_state(1, uint64)[0]`` is the
seed of replicate ``r`` at particle count ``N``, so the order in which sweep
entries execute never changes their randomness.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import echo
from .io import ConvergenceRow
from .meso import FluidConfig, init_cloud, knn_lipschitz, solve_fluid, step_cloud
from .metrics import phase_distance, record_from
from .micro import DragConfig, MicroStepper, init_particles

ACCEPTANCE = {
    1: "single_particle_relaxation",
    2: "meso_decoupled_relaxation",
    3: "min_distance_preservation",
    4: "s2_control",
    5: "buckling_boundedness",
    6: "wasserstein_convergence",
    7: "drag_oracle_equivalence",
    8: "fluid_oracle_equivalence",
    9: "ot_exactness",
    10: "kernel_accuracy",
    11: "dissipation",
    12: "determinism",
}

RELAXATION_TOL = 1e-6
DMIN_RATIO_MIN = 0.5
S2_RATIO_MAX = 4.0
BUCKLING_FACTOR = 8.0
SLOPE_MAX = -0.2


class RunError(RuntimeError):
    """A simulation failed; the message names the step."""


def derive_seed(master, n, replicate):
    ss = np.random.SeedSequence([int(master), int(n), int(replicate)])
    return int(ss.generate_state(1, np.uint64)[0])


def sample_steps(config):
    n = config.n_steps
    steps = list(range(0, n + 1, config.diag_interval))
    if steps[-1] != n:
        steps.append(n)
    return steps


def drag_config(config):
    return DragConfig(config.drag_tol, config.drag_max_iter, config.drag_theta, config.kappa)


def fluid_config(config):
    return FluidConfig(config.fluid_tol, config.fluid_max_iter, config.fluid_theta, config.coupling)


@dataclass
class RunResult:
    records: list = field(default_factory=list)
    states: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def final(self):
        return self.states[-1]


def _lipschitz(X, V, k):
    return knn_lipschitz(X, V, k) if len(X) > 1 else float("nan")


def run_micro(config, N=None, seed=None, state=None, sink=None):
    """Integrate the particle system to ``config.T``.

    Diagnostics are recorded every ``diag_interval`` steps and at the end;
    ``sink(step, state)`` (if given) sees every sampled state.
    """
    N = config.N if N is None else N
    seed = config.seed if seed is None else seed
    if state is None:
        state = init_particles(config.initial, N, seed)
    stepper = MicroStepper(drag_config(config), config.initial.g)
    samples = set(sample_steps(config))
    out = RunResult()
    k = 0
    try:
        for k in range(config.n_steps + 1):
            solved = stepper.forces(state)
            if k in samples:
                out.records.append(record_from(
                    state.t, state.X, state.V, solved[1].nf,
                    _lipschitz(state.X, state.V, config.lipschitz_k),
                ))
                out.states.append(state)
                if sink is not None:
                    sink(k, state)
            if k < config.n_steps:
                state = stepper.advance(state, config.dt, solved)
                state = type(state)(state.X, state.V, state.R, (k + 1) * config.dt)
    except Exception as exc:
        raise RunError(f"micro run failed at step {k}: {exc}") from exc
    return out


def run_meso(config, M=None, seed=None, micro_state=None, cloud=None, sink=None):
    """Integrate the Lagrangian cloud to ``config.T``.

    The record's ``nf_inf`` column holds ``max |W_k - u_k|``, the drag per
    unit mass that plays the role of ``N F_i``.
    """
    if cloud is None:
        if micro_state is not None:
            cloud = init_cloud(config.initial, micro_state.N, seed, mode=micro_state,
                               delta_factor=config.delta_factor)
        else:
            M = (config.N if config.M == "coupled" else config.M) if M is None else M
            seed = config.seed if seed is None else seed
            if config.M == "coupled" and M == config.N:
                micro_state = init_particles(config.initial, M, seed)
                cloud = init_cloud(config.initial, M, seed, mode=micro_state,
                                   delta_factor=config.delta_factor)
            else:
                cloud = init_cloud(config.initial, M, seed, delta_factor=config.delta_factor)
    cfg = fluid_config(config)
    g = config.initial.g
    samples = set(sample_steps(config))
    out = RunResult()
    k = 0
    try:
        for k in range(config.n_steps + 1):
            if cfg.coupling:
                u = solve_fluid(cloud, cfg.tol, cfg.max_iter, cfg.theta,
                                dense_fallback=cfg.dense_fallback).u_at_points
            else:
                u = np.zeros_like(cloud.W)
            if k in samples:
                lip = _lipschitz(cloud.Y, cloud.W, config.lipschitz_k)
                out.records.append(record_from(cloud.t, cloud.Y, cloud.W, cloud.W - u, lip))
                out.states.append(cloud)
                if lip > config.lipschitz_threshold:
                    out.warnings.append({
                        "kind": "lipschitz_threshold_exceeded", "t": cloud.t,
                        "value": lip, "threshold": config.lipschitz_threshold,
                    })
                if sink is not None:
                    sink(k, cloud)
            if k < config.n_steps:
                cloud = step_cloud(cloud, config.dt, g, cfg, u0=u)
                cloud = type(cloud)(cloud.Y, cloud.W, cloud.m, cloud.delta, (k + 1) * config.dt)
    except Exception as exc:
        raise RunError(f"meso run failed at step {k}: {exc}") from exc
    return out


# --- fits ----------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float


def fit_rate(pairs):
    """Least-squares line through ``(log N, log value)``; residual is the RMS misfit."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (N, value) pairs")
    n, v = np.array(pairs, dtype=float).T
    if np.any(v <= 0) or np.any(n <= 0):
        raise ValueError("fit_rate needs positive N and values")
    x, y = np.log(n), np.log(v)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return RateFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def fit_exponential(times, values):
    """Envelope ``A e^{C t}`` over positive samples.

    ``C`` is the least-squares slope of ``log value`` against ``t``; ``A`` is
    the smallest prefactor for which every sample lies on or below the curve.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    t, v = t[keep], v[keep]
    if len(t) == 0:
        return 0.0, 0.0
    if len(np.unique(t)) < 2:
        C = 0.0
    else:
        C = float(np.polyfit(t, np.log(v), 1)[0])
    A = float(np.max(v * np.exp(-C * t)))
    return A, C


# --- convergence study -----------------------------------------------------------


def _clean(text):
    return " ".join(str(text).replace(",", ";").split())


def run_pair(config, N, seed):
    """Micro run and coupled (or i.i.d.) meso run for one ``(N, seed)``."""
    micro0 = init_particles(config.initial, N, seed)
    if config.M == "coupled":
        cloud0 = init_cloud(config.initial, N, seed, mode=micro0, delta_factor=config.delta_factor)
    else:
        cloud0 = init_cloud(config.initial, config.M, seed, delta_factor=config.delta_factor)
    micro = run_micro(config, state=micro0)
    meso = run_meso(config, cloud=cloud0)
    return micro, meso


def _w2_kwargs(config):
    return {
        "method": config.w2_method, "cap": config.w2_cap,
        "entropic_fallback": config.w2_entropic_fallback,
        "epsilon": config.w2_epsilon or None,
    }


def convergence_rows(config, N, seed, micro, meso, wallclock=0.0):
    rows = []
    r0 = micro.records[0]
    s2_0 = r0.s2_over_n
    peak = -np.inf
    kw = _w2_kwargs(config)
    for rec, state, cloud in zip(micro.records, micro.states, meso.states):
        peak = max(peak, rec.buckling)
        phase = phase_distance(state, cloud, **kw).w2
        space = phase_distance(state, cloud, space_only=True, **kw).w2
        rows.append(ConvergenceRow(
            N=N, seed=seed, t=rec.t, w2_phase=phase, w2_space=space,
            dmin_ratio=rec.d_min / r0.d_min,
            s2_ratio=(rec.s2_over_n / s2_0) if s2_0 > 0 else 1.0,
            buckling_max=peak, wallclock=wallclock,
        ))
    return rows


def run_converge(config, on_run=None):
    """The N-sweep: rows for every ``(N, replicate, sample time)`` plus a summary.

    A failing run contributes one row with ``status`` describing the error
    and does not stop the sweep.  ``on_run(N, seed, micro, meso)`` is called
    after each successful pair.
    """
    if not config.sweep:
        raise ValueError("convergence study needs a non-empty sweep")
    rows, buckling0 = [], {}
    for N in config.sweep:
        for r in range(config.seeds_per_n):
            seed = derive_seed(config.seed, N, r)
            start = time.perf_counter()
            try:
                micro, meso = run_pair(config, N, seed)
                elapsed = time.perf_counter() - start if config.record_wallclock else 0.0
                rows += convergence_rows(config, N, seed, micro, meso, elapsed)
                buckling0[(N, seed)] = micro.records[0].buckling
                if on_run is not None:
                    on_run(N, seed, micro, meso)
            except Exception as exc:
                nan = float("nan")
                rows.append(ConvergenceRow(N, seed, nan, nan, nan, nan, nan, nan, 0.0,
                                           status="failed: " + _clean(exc)))
    return rows, summarize(config, rows, buckling0)


def _ok(rows):
    return [r for r in rows if r.status == "ok"]


def summarize(config, rows, buckling0=None):
    """Medians, fitted rates and acceptance flags of a convergence table."""
    ok = _ok(rows)
    failed = len(rows) - len(ok)
    per_n = {}
    medians = []
    for N in config.sweep:
        mine = [r for r in ok if r.N == N]
        if not mine:
            per_n[N] = {"runs_ok": 0}
            continue
        t_end = max(r.t for r in mine)
        final = [r.w2_phase for r in mine if r.t == t_end]
        med = float(np.median(final))
        medians.append((N, med))
        A, C = fit_exponential([r.t for r in mine], [r.w2_phase for r in mine])
        per_n[N] = {
            "runs_ok": len({r.seed for r in mine}),
            "t_final": t_end,
            "median_w2_phase_final": med,
            "median_w2_space_final": float(np.median([r.w2_space for r in mine if r.t == t_end])),
            "min_dmin_ratio": min(r.dmin_ratio for r in mine),
            "max_s2_ratio": max(r.s2_ratio for r in mine),
            "max_buckling": max(r.buckling_max for r in mine),
            "fit_A": A,
            "fit_C": C,
        }
    summary = {
        "software": {"name": "mfstokes", "version": __version__},
        "config": echo(config),
        "failed_runs": failed,
        "per_n": per_n,
    }
    flags = {ACCEPTANCE[i]: None for i in ACCEPTANCE}
    if ok and not failed:
        flags[ACCEPTANCE[3]] = all(r.dmin_ratio >= DMIN_RATIO_MIN for r in ok)
        flags[ACCEPTANCE[4]] = all(r.s2_ratio <= S2_RATIO_MAX for r in ok)
        if buckling0:
            flags[ACCEPTANCE[5]] = all(
                r.buckling_max <= BUCKLING_FACTOR * buckling0[(r.N, r.seed)] for r in ok
            )
    if len(medians) >= 2:
        fit = fit_rate(medians)
        summary["w2_rate"] = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual}
        base = medians[0][0]
        base_rows = [r for r in ok if r.N == base]
        A, C = fit_exponential([r.t for r in base_rows], [r.w2_phase for r in base_rows])
        envelope_ok = all(r.w2_phase <= A * np.exp(C * r.t) * (1 + 1e-12) for r in ok if r.N > base)
        decreasing = all(b[1] < a[1] for a, b in zip(medians, medians[1:]))
        summary["envelope"] = {"fitted_on": base, "A": A, "C": C}
        summary["w2_checks"] = {
            "medians_strictly_decreasing": decreasing,
            "slope_below": fit.slope <= SLOPE_MAX,
            "envelope_holds": envelope_ok,
        }
        if not failed:
            flags[ACCEPTANCE[6]] = decreasing and fit.slope <= SLOPE_MAX and envelope_ok
    summary["acceptance"] = flags
    return summary


def relaxation_error(records_or_states, g, v0, kind="micro"):
    """Largest deviation of velocities from ``g (1 - e^-t) + v0 e^-t`` over the samples."""
    g = np.asarray(g, dtype=float)
    worst = 0.0
    for s in records_or_states:
        V = s.V if kind == "micro" else s.W
        exact = g * (1.0 - np.exp(-s.t)) + np.asarray(v0) * np.exp(-s.t)
        worst = max(worst, float(np.max(np.abs(V - exact))))
    return worst


def run_summary(config, result, kind):
    """Summary document of a single micro or meso run."""
    flags = {ACCEPTANCE[i]: None for i in ACCEPTANCE}
    recs = result.records
    extra = {}
    first = result.states[0]
    v0 = first.V if kind == "micro" else first.W
    if kind == "micro":
        if first.N == 1:
            err = relaxation_error(result.states, config.initial.g, v0, "micro")
            extra["relaxation_max_error"] = err
            flags[ACCEPTANCE[1]] = err <= RELAXATION_TOL
        elif recs:
            flags[ACCEPTANCE[3]] = all(r.d_min / recs[0].d_min >= DMIN_RATIO_MIN for r in recs)
            flags[ACCEPTANCE[4]] = all(r.s2_over_n <= S2_RATIO_MAX * recs[0].s2_over_n for r in recs)
            flags[ACCEPTANCE[5]] = max(r.buckling for r in recs) <= BUCKLING_FACTOR * recs[0].buckling
    elif not config.coupling:
        err = relaxation_error(result.states, config.initial.g, v0, "meso")
        extra["relaxation_max_error"] = err
        flags[ACCEPTANCE[2]] = err <= RELAXATION_TOL
    return {
        "software": {"name": "mfstokes", "version": __version__},
        "config": echo(config),
        "kind": kind,
        "samples": len(recs),
        **extra,
        "warnings": result.warnings,
        "acceptance": flags,
    }
