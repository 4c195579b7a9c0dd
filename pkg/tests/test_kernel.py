import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from mfstokes.kernel import mobility_matrix, oseen, oseen_blob, superpose

from oracles import ball_average_oseen_quadrature

vectors = st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array)


def test_oseen_unit_vector():
    M = oseen([1.0, 0.0, 0.0])
    np.testing.assert_allclose(M, np.diag([2.0, 1.0, 1.0]) / (8 * np.pi), rtol=1e-15)
    np.testing.assert_allclose(np.diag(M), [0.0795775, 0.0397887, 0.0397887], atol=1e-7)


def test_oseen_singular_at_origin():
    with pytest.raises(ValueError):
        oseen([0.0, 0.0, 0.0])


@given(vectors)
def test_oseen_homogeneity(x):
    if np.linalg.norm(x) < 1e-3:
        return
    np.testing.assert_allclose(oseen(2 * x), oseen(x) / 2, rtol=1e-13)


def test_oseen_isotropy():
    rng = np.random.default_rng(3)
    for _ in range(20):
        Q = Rotation.random(random_state=rng).as_matrix()
        x = rng.normal(size=3)
        np.testing.assert_allclose(Q @ oseen(x) @ Q.T, oseen(Q @ x), rtol=1e-12, atol=1e-15)


def test_oseen_symmetric_psd():
    rng = np.random.default_rng(4)
    for x in rng.normal(size=(20, 3)):
        M = oseen(x)
        assert np.array_equal(M, M.T)
        assert np.linalg.eigvalsh(M).min() >= 0


def test_blob_center_is_isotropic():
    d = 0.37
    np.testing.assert_allclose(oseen_blob(np.zeros(3), d), np.eye(3) / (4 * np.pi * d), rtol=1e-15)


def test_blob_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        oseen_blob(np.ones(3), 0.0)


def test_blob_frozen_oracle_entries():
    # ball-average quadrature (96 x 96 nodes) at x = (3d, 0, 0), d = 0.5
    d = 0.5
    expected = np.diag([0.05187272219291352, 0.02711528660084165, 0.02711528660084165])
    np.testing.assert_allclose(oseen_blob([3 * d, 0, 0], d), expected, rtol=1e-12, atol=1e-16)


def test_blob_far_field_at_20d():
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = rng.uniform(0.01, 2)
        u = rng.normal(size=3)
        x = 20 * d * u / np.linalg.norm(u)
        P, B = oseen(x), oseen_blob(x, d)
        assert np.linalg.norm(B - P) / np.linalg.norm(P) < 1e-3


@pytest.mark.parametrize("ratio", [0.0, 0.3, 0.99, 1.0, 1.01, 2.5, 9.9, 10.0, 17.0])
def test_blob_matches_quadrature(ratio):
    rng = np.random.default_rng(int(ratio * 100))
    d = 0.8
    u = rng.normal(size=3)
    x = ratio * d * u / np.linalg.norm(u)
    ref = ball_average_oseen_quadrature(x, d, 48, 48)
    got = oseen_blob(x, d)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-12


def test_blob_quadrature_oracle_self_converges():
    x, d = np.array([0.4, -0.7, 1.1]), 1.0
    coarse = ball_average_oseen_quadrature(x, d, 24, 24)
    fine = ball_average_oseen_quadrature(x, d, 64, 64)
    assert np.linalg.norm(coarse - fine) / np.linalg.norm(fine) < 1e-8


def test_blob_continuous_across_ball_surface():
    d = 1.0
    e = np.array([0.3, 0.4, np.sqrt(1 - 0.25)])
    inside = oseen_blob(e * (1 - 1e-9), d)
    outside = oseen_blob(e * (1 + 1e-9), d)
    np.testing.assert_allclose(inside, outside, rtol=1e-8)


@settings(max_examples=50)
@given(vectors, st.floats(0.05, 3), st.floats(0.1, 10))
def test_blob_homogeneity(x, d, lam):
    np.testing.assert_allclose(oseen_blob(lam * x, lam * d), oseen_blob(x, d) / lam, rtol=1e-12, atol=1e-14)


@settings(max_examples=50)
@given(vectors, st.floats(0.05, 3))
def test_blob_symmetric_psd(x, d):
    M = oseen_blob(x, d)
    np.testing.assert_allclose(M, M.T, rtol=0, atol=1e-16)
    assert np.linalg.eigvalsh(M).min() >= -1e-15


def test_superpose_no_sources():
    out = superpose(np.ones((4, 3)), np.empty((0, 3)), np.empty((0, 3)), 0.1)
    assert out.shape == (4, 3) and not out.any()


def test_superpose_far_field_point_kernel():
    d = 0.01
    F = np.array([0.3, -1.0, 2.0])
    x = np.array([100 * d, 0, 0])
    got = superpose(x[None], np.zeros((1, 3)), F[None], d)[0]
    want = oseen(x) @ F
    assert np.linalg.norm(got - want) / np.linalg.norm(want) < 1e-4
    np.testing.assert_allclose(got, oseen_blob(x, d) @ F, rtol=1e-14)


def test_superpose_symmetric_pair():
    d = 0.2
    a = np.array([0.1, 0.5, -0.3])
    F = np.array([1.0, 2.0, -0.5])
    got = superpose(np.zeros((1, 3)), np.array([a, -a]), np.array([F, F]), d)[0]
    np.testing.assert_allclose(got, 2 * oseen_blob(a, d) @ F, rtol=1e-14)


def test_superpose_matches_dense_matrix():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, (30, 3))
    F = rng.normal(size=(30, 3))
    for exclude in (True, False):
        dense = (mobility_matrix(X, 0.15, exclude) @ F.ravel()).reshape(30, 3)
        np.testing.assert_allclose(superpose(X, X, F, 0.15, exclude), dense, rtol=1e-12, atol=1e-14)


def test_superpose_exclude_self_needs_identified_targets():
    with pytest.raises(ValueError):
        superpose(np.zeros((2, 3)), np.zeros((3, 3)), np.zeros((3, 3)), 0.1, exclude_self=True)


def test_divergence_free_second_order():
    rng = np.random.default_rng(7)
    sources = rng.uniform(-0.5, 0.5, (20, 3))
    forces = rng.normal(size=(20, 3))
    d = 0.05
    probes = []
    while len(probes) < 8:
        p = rng.uniform(-1.5, 1.5, 3)
        if np.min(np.linalg.norm(sources - p, axis=1)) > 0.3:
            probes.append(p)
    probes = np.array(probes)

    def div(h):
        total = np.zeros(len(probes))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            up = superpose(probes + e, sources, forces, d)[:, k]
            dn = superpose(probes - e, sources, forces, d)[:, k]
            total += (up - dn) / (2 * h)
        return total

    scale = np.linalg.norm(superpose(probes, sources, forces, d), axis=1)
    coarse, fine = div(1e-3), div(1e-4)
    assert np.all(np.abs(coarse) <= 100 * 1e-6 * scale)
    assert np.all(np.abs(fine) <= 100 * 1e-8 * scale)
    ratio = np.abs(coarse) / np.abs(fine)
    assert np.median(ratio) > 50 and np.median(ratio) < 200


def test_gram_form_psd():
    rng = np.random.default_rng(8)
    for _ in range(20):
        X = rng.uniform(-1, 1, (25, 3))
        F = rng.normal(size=(25, 3))
        d = rng.uniform(0.01, 0.5)
        gram = np.sum(F * superpose(X, X, F, d))
        assert gram >= -1e-12 * np.sum(F * F)


def test_superpose_thread_count_independent():
    import numba
    from mfstokes import set_threads

    rng = np.random.default_rng(9)
    X = rng.normal(size=(200, 3))
    F = rng.normal(size=(200, 3))
    set_threads(1)
    one = superpose(X, X, F, 0.05, True)
    set_threads(numba.config.NUMBA_NUM_THREADS)
    many = superpose(X, X, F, 0.05, True)
    set_threads(1)
    assert np.array_equal(one, many)
