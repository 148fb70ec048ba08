import itertools

import numpy as np
import pytest

from gcurate import kernels
from gcurate.clustering import Clustering, cluster_stats, default_k, kmeans, kmeanspp_init, lloyd
from gcurate.kernels import get_backend
from oracles import kmeans_exhaustive_optimum


def test_lloyd_1d_hand_trace():
    x = np.array([[0.0], [1.0], [10.0]])
    c = lloyd(x, np.array([[0.0], [10.0]]))
    assert c.assignments.tolist() == [0, 0, 1]
    np.testing.assert_allclose(c.centroids[:, 0], [0.5, 10.0])
    assert c.objective == pytest.approx(0.5)
    assert c.history[0] == 1.0 and c.history[-1] == 0.5


def test_cluster_stats_1d():
    x = np.array([[0.0], [1.0], [10.0]])
    st = cluster_stats(x, lloyd(x, np.array([[0.0], [10.0]])))
    np.testing.assert_allclose(st.pi, [2 / 3, 1 / 3])
    np.testing.assert_allclose(st.d_intra, [0.5, 1e-12])
    np.testing.assert_allclose(st.d_inter, [9.5, 9.5])
    np.testing.assert_allclose(st.sigma, [0.5, 0.0])


def test_stats_single_cluster_conventions(rng):
    x = np.full((5, 2), 3.0)
    st = cluster_stats(x, lloyd(x, x[:1]))
    assert st.pi.tolist() == [1.0] and st.d_inter.tolist() == [1.0]
    assert st.d_intra.tolist() == [1e-12] and st.sigma.tolist() == [0.0]


def test_k1_is_global_mean(rng):
    x = rng.normal(size=(40, 3))
    c = kmeans(x, 1, seed=0)
    np.testing.assert_allclose(c.centroids[0], x.mean(axis=0), atol=1e-12)
    assert c.objective == pytest.approx(x.var(axis=0).sum() * 40)


def test_two_blobs_recovered(rng):
    a = rng.normal(scale=0.3, size=(30, 2))
    b = rng.normal(scale=0.3, size=(30, 2)) + 10
    x = np.vstack([a, b])
    c = kmeans(x, 2, seed=3)
    assert len(set(c.assignments[:30])) == 1 and len(set(c.assignments[30:])) == 1
    assert c.assignments[0] != c.assignments[-1]


def test_kmeanspp_exhaustion_and_determinism(rng):
    x = rng.normal(size=(7, 2))
    cent = kmeanspp_init(x, 7, seed=1)
    assert sorted(map(tuple, cent)) == sorted(map(tuple, x))
    assert np.array_equal(kmeanspp_init(x, 3, seed=9), kmeanspp_init(x, 3, seed=9))
    one = kmeanspp_init(x, 1, seed=4)
    assert any(np.array_equal(one[0], r) for r in x)


def test_kmeanspp_with_duplicates_fills_k():
    x = np.array([[0.0], [0.0], [1.0], [1.0]])
    cent = kmeanspp_init(x, 4, seed=0)
    assert sorted(cent[:, 0].tolist()) == [0.0, 0.0, 1.0, 1.0]


def test_kmeanspp_rejects_bad_k(rng):
    x = rng.normal(size=(3, 2))
    for k in (0, 4):
        with pytest.raises(ValueError):
            kmeanspp_init(x, k, 0)


def test_assignment_is_nearest_with_low_index_ties():
    x = np.array([[0.0], [1.0], [2.0]])
    c = lloyd(x, np.array([[0.5], [0.5], [5.0]]), max_iter=0)
    # duplicate centroids: the lower index wins every tie
    assert c.assignments.tolist() == [0, 0, 0]


def test_post_assignment_optimality(rng):
    x = rng.normal(size=(200, 4))
    c = kmeans(x, 6, seed=2)
    d = ((x[:, None, :] - c.centroids[None]) ** 2).sum(-1)
    own = d[np.arange(len(x)), c.assignments]
    assert np.all(own <= d.min(axis=1) + 1e-9)
    assert c.objective == pytest.approx(own.sum(), rel=1e-6)


def test_empty_cluster_reseeded():
    x = np.array([[0.0], [0.1], [0.2], [5.0], [5.1]])
    c = lloyd(x, np.array([[0.1], [100.0], [5.0]]))
    assert np.all(c.sizes() > 0)


def test_objective_monotone_many_seeds(rng):
    for seed in range(30):
        x = rng.normal(size=(80, 3))
        h = kmeans(x, 5, seed=seed).history
        assert all(b <= a for a, b in zip(h, h[1:]))


def test_determinism(rng):
    x = rng.normal(size=(100, 5))
    a, b = kmeans(x, 4, 11), kmeans(x, 4, 11)
    assert np.array_equal(a.assignments, b.assignments) and np.array_equal(a.centroids, b.centroids)


def test_assign_backends_bit_identical(rng):
    x = rng.normal(size=(300, 7))
    c = rng.normal(size=(9, 7))
    la, da = get_backend("python").assign_nearest(x, c)
    lb, db = get_backend("compiled").assign_nearest(x, c, 3)
    assert np.array_equal(la, lb) and np.array_equal(da, db)


@pytest.mark.parametrize("m,k", [(5, 2), (6, 3), (7, 2), (8, 3)])
def test_brute_force_optimum(rng, m, k):
    x = rng.normal(size=(m, 2))
    best = min(
        lloyd(x, x[list(idx)]).objective for idx in itertools.combinations(range(m), k)
    )
    assert best == pytest.approx(kmeans_exhaustive_optimum(x, k), abs=1e-9)


@pytest.mark.parametrize("m,expected", [(1, 1), (2, 2), (3, 2), (10, 3), (1000, 32), (250000, 64)])
def test_default_k(m, expected):
    assert default_k(m) == expected


def test_backend_name():
    assert kernels.BACKEND in ("compiled", "python")
