import numpy as np
import pytest

from sgn.knn_index import SELF, PointSet, batch_kth_neighbors, kth_neighbor


def sort_oracle(points, query, k, exclude=None):
    """Full sort on (distance, index); distances from explicit differences.

    Summation order differs from the index's, so distances agree to a few ulps.
    """
    keyed = [(float(np.sum((p - query) ** 2)), i) for i, p in enumerate(points) if i != exclude]
    keyed.sort()
    return keyed[k - 1][1], keyed[k - 1][0]


LINE = PointSet([[0.0], [1.0], [3.0]])


def test_first_neighbor_with_exclusion():
    r = kth_neighbor(LINE, [0.0], 1, exclude=0)
    assert (r.index, r.sq_dist) == (1, 1.0)


def test_second_neighbor_with_exclusion():
    r = kth_neighbor(LINE, [0.0], 2, exclude=0)
    assert (r.index, r.sq_dist) == (2, 9.0)


def test_self_match():
    assert kth_neighbor(LINE, [1.0], 1).sq_dist == 0.0


@pytest.mark.parametrize("kwargs", [dict(k=3, exclude=0), dict(k=4), dict(k=0)])
def test_k_too_large(kwargs):
    with pytest.raises(ValueError):
        kth_neighbor(LINE, [0.0], **kwargs)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        kth_neighbor(LINE, [0.0, 1.0], 1)


def test_empty_set():
    with pytest.raises(ValueError):
        kth_neighbor(PointSet(np.zeros((0, 2))), [0.0, 0.0], 1)


def test_batch_of_one_equals_single(rng):
    ps = PointSet(rng.normal(size=(30, 4)))
    q = rng.normal(size=4)
    single = kth_neighbor(ps, q, 2)
    batch = batch_kth_neighbors(ps, q[None, :], 2)
    assert (batch[0].index, batch[0].sq_dist) == (single.index, single.sq_dist)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_batch_equals_sequential(rng, k):
    ps = PointSet(rng.normal(size=(50, 6)))
    qs = rng.normal(size=(10, 6))
    batch = batch_kth_neighbors(ps, qs, k)
    for i, q in enumerate(qs):
        one = kth_neighbor(ps, q, k)
        assert batch.index[i] == one.index and batch.sq_dist[i] == one.sq_dist


def test_self_exclusion_no_zero_distance(rng):
    pts = rng.normal(size=(40, 3))
    res = batch_kth_neighbors(PointSet(pts), pts, 1, exclude=SELF)
    assert np.all(res.sq_dist > 0)
    assert np.all(res.index != np.arange(40))


def test_self_exclusion_with_duplicates():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [5.0, 5.0]])
    res = batch_kth_neighbors(PointSet(pts), pts, 1, exclude=SELF)
    np.testing.assert_array_equal(res.index, [1, 0, 0])
    np.testing.assert_array_equal(res.sq_dist, [0.0, 0.0, 50.0])


def test_ties_resolve_to_lowest_index():
    pts = np.array([[2.0], [-1.0], [1.0], [-1.0]])
    assert kth_neighbor(PointSet(pts), [0.0], 1).index == 1
    assert kth_neighbor(PointSet(pts), [0.0], 2).index == 2
    assert kth_neighbor(PointSet(pts), [0.0], 3).index == 3


def test_matches_sort_oracle_random(rng):
    for trial in range(200):
        n, d, k = int(rng.integers(6, 120)), int(rng.integers(1, 10)), int(rng.integers(1, 6))
        if trial % 3 == 0:  # integer grid: many exact ties
            pts = rng.integers(-2, 3, size=(n, d)).astype(float)
        else:
            pts = rng.normal(size=(n, d))
        ps = PointSet(pts)
        qs = np.vstack([rng.normal(size=(3, d)), pts[:2]])
        res = batch_kth_neighbors(ps, qs, k)
        for i, q in enumerate(qs):
            idx, dist = sort_oracle(pts, q, k)
            assert res.index[i] == idx
            assert res.sq_dist[i] == pytest.approx(dist, rel=1e-13, abs=1e-300)


def test_kth_distance_monotone_in_k(rng):
    ps = PointSet(rng.normal(size=(60, 5)))
    qs = rng.normal(size=(15, 5))
    dists = [batch_kth_neighbors(ps, qs, k).sq_dist for k in range(1, 6)]
    assert all(np.all(a <= b) for a, b in zip(dists, dists[1:]))


def test_high_dimension_near_ties_are_exact(rng):
    # Large-norm 784-d points separated by tiny offsets stress the expansion's rounding.
    base = rng.random(784) * 10
    pts = base + 1e-7 * rng.normal(size=(30, 784))
    q = base + 1e-7 * rng.normal(size=784)
    for k in (1, 2, 5):
        r = kth_neighbor(PointSet(pts), q, k)
        idx, dist = sort_oracle(pts, q, k)
        assert r.index == idx and r.sq_dist == pytest.approx(dist, rel=1e-12)


def test_rebuild_advances_generation(rng):
    ps = PointSet(rng.normal(size=(5, 2)))
    ps2 = ps.rebuild(rng.normal(size=(5, 2)))
    assert ps2.generation == ps.generation + 1
    assert batch_kth_neighbors(ps2, np.zeros((1, 2)), 1).generation == ps2.generation
