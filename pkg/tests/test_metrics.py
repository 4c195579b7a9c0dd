import numpy as np
import pytest

from mfstokes.meso import LagrangianCloud
from mfstokes.metrics import (
    TransportError, buckling, d_min, phase_distance, record_from, s_beta, v_norm, wasserstein2,
)
from mfstokes.micro import MicroState, solve_drag

from oracles import brute_dmin, permutation_min_cost


def test_s_beta_pair():
    assert s_beta([[0, 0, 0], [2, 0, 0]], 1) == 0.5


def test_s_beta_collinear_middle_dominates():
    assert s_beta([[0, 0, 0], [1, 0, 0], [2, 0, 0]], 2) == 2.0


def test_s_beta_dilation():
    X = np.random.default_rng(1).normal(size=(40, 3))
    for beta in (1.0, 2.0, 4.0):
        np.testing.assert_allclose(s_beta(3 * X, beta), 3**-beta * s_beta(X, beta), rtol=1e-12)


def test_s_beta_single_point_is_zero():
    assert s_beta([[1, 2, 3]], 2) == 0.0


def test_s_beta_coincident_points():
    with pytest.raises(ValueError):
        s_beta([[0, 0, 0], [0, 0, 0], [1, 0, 0]], 2)


def test_s_beta_monotone_under_insertion():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 3))
    for _ in range(10):
        Y = np.vstack([X, rng.normal(size=(1, 3))])
        assert s_beta(Y, 2) >= s_beta(X, 2)
        X = Y


def test_d_min_cube_corner():
    assert d_min([[0, 0, 0], [1, 0, 0], [10, 10, 10]]) == 1.0


def test_d_min_duplicate():
    assert d_min([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5], [1, 0, 0]]) == 0.0


def test_d_min_matches_brute_force():
    X = np.random.default_rng(3).uniform(size=(1000, 3))
    assert d_min(X) == pytest.approx(brute_dmin(X), rel=1e-14)


def test_v_norm():
    V = [[1, 0, 0], [0, 1, 0]]
    assert v_norm(V, 2) == pytest.approx(np.sqrt(2))
    assert v_norm(V, np.inf) == 1.0
    assert v_norm(np.zeros((3, 3)), 2) == 0.0 and v_norm(np.zeros((3, 3)), np.inf) == 0.0
    W = np.random.default_rng(4).normal(size=(10, 3))
    assert v_norm(-2.5 * W, 2) == pytest.approx(2.5 * v_norm(W, 2))
    assert v_norm(-2.5 * W, np.inf) == pytest.approx(2.5 * v_norm(W, np.inf))


def test_buckling_single_stationary_particle():
    state = MicroState.from_arrays(np.zeros((1, 3)), np.zeros((1, 3)))
    forces, _ = solve_drag(state, 1.0)
    assert buckling(state, forces) == 0.0


def _random_state(n, seed, spread=1.0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-spread, spread, (n, 3))
    return MicroState.from_arrays(X, rng.normal(size=(n, 3)))


def test_buckling_components():
    state = _random_state(20, 5)
    d = 4 * state.R
    forces, _ = solve_drag(state, d)
    parts = (np.max(np.linalg.norm(forces.nf, axis=1)) + np.max(np.linalg.norm(state.V, axis=1))
             + s_beta(state.X, 2) / state.N)
    assert abs(buckling(state, forces) - parts) <= 1e-15 * parts
    rec = record_from(0.0, state.X, state.V, forces.nf)
    assert rec.buckling == rec.nf_inf + rec.v_inf + rec.s2_over_n


def test_buckling_monotone_under_velocity_scaling():
    for seed in range(5):
        state = _random_state(15, seed)
        d = 4 * state.R
        base = buckling(state, solve_drag(state, d)[0])
        for c in (1.0, 1.5, 3.0):
            scaled = MicroState(state.X, c * state.V, state.R)
            value = buckling(scaled, solve_drag(scaled, d)[0])
            assert value >= base - 1e-12
            base = value


# --- transport ---------------------------------------------------------------


def test_w2_identical_clouds():
    A = np.random.default_rng(6).normal(size=(12, 6))
    assert wasserstein2(A, A).w2 == 0.0


def test_w2_two_diracs():
    x, y = np.array([1.0, 2, 3]), np.array([-1.0, 0, 4])
    assert wasserstein2(x[None], y[None]).w2 == pytest.approx(np.linalg.norm(x - y), rel=1e-15)


def test_w2_five_point_enumeration():
    rng = np.random.default_rng(7)
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    assert wasserstein2(A, B).cost == pytest.approx(permutation_min_cost(A, B), abs=1e-12)


def test_w2_beats_random_permutations():
    rng = np.random.default_rng(8)
    for _ in range(10):
        A, B = rng.normal(size=(20, 6)), rng.normal(size=(20, 6))
        best = wasserstein2(A, B).cost
        for _ in range(100):
            p = rng.permutation(20)
            assert best <= np.mean(np.sum((A - B[p]) ** 2, axis=1)) + 1e-12


def test_w2_general_weights_lp():
    # moving half the mass of one Dirac: cost is a weighted sum of squared gaps
    A = np.array([[0.0, 0, 0]])
    B = np.array([[1.0, 0, 0], [0, 2.0, 0]])
    res = wasserstein2(A, B, [1.0], [0.5, 0.5])
    assert res.cost == pytest.approx(0.5 * 1 + 0.5 * 4, rel=1e-9)
    assert res.plan_support_size == 2


def test_w2_general_weights_match_assignment_on_uniform_input():
    rng = np.random.default_rng(9)
    A, B = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
    w = np.full(6, 1 / 6)
    w_lp = w.copy()
    w_lp[0] += 1e-11  # dodge the assignment fast path
    w_lp[1] -= 1e-11
    lp = wasserstein2(A, B, w_lp, w)
    assert lp.cost == pytest.approx(wasserstein2(A, B).cost, abs=1e-9)


def test_w2_mass_mismatch():
    with pytest.raises(TransportError):
        wasserstein2(np.zeros((2, 3)), np.zeros((2, 3)), [0.5, 0.6], None)


def test_w2_cap_and_fallback():
    rng = np.random.default_rng(10)
    A, B = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    with pytest.raises(TransportError):
        wasserstein2(A, B, cap=20)
    res = wasserstein2(A, B, cap=20, entropic_fallback=True)
    assert res.method.startswith("entropic")


def test_w2_entropic_close_to_exact():
    rng = np.random.default_rng(11)
    A, B = rng.normal(size=(60, 3)), rng.normal(size=(60, 3)) + 0.5
    exact = wasserstein2(A, B).cost
    ent = wasserstein2(A, B, method="entropic")
    assert ent.epsilon > 0
    assert abs(ent.cost - exact) <= 0.05 * exact


def test_w2_entropic_identical_is_zero():
    A = np.random.default_rng(12).normal(size=(20, 3))
    assert wasserstein2(A, A, method="entropic").cost == pytest.approx(0.0, abs=1e-9)


def test_phase_distance_coupled_start_is_zero():
    state = _random_state(10, 13)
    cloud = LagrangianCloud(state.X.copy(), state.V.copy(), np.full(10, 0.1), 0.3)
    assert phase_distance(state, cloud).w2 == 0.0
    moved = MicroState(state.X + 1e-3 * state.V, state.V, state.R)
    assert phase_distance(moved, cloud).w2 > 0
