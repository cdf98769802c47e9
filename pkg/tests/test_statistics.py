"""Tests for shape distances, Karcher means and clustering."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import fcluster, linkage as scipy_linkage
from scipy.spatial.distance import squareform

from geomatch import manifolds as mf
from geomatch.errors import DomainError
from geomatch.generators import translated_reparameterized
from geomatch.matching import MatchConfig
from geomatch.statistics import (LINKAGES, DistanceMatrix, cluster, distance_matrix,
                                 karcher_mean, shape_distance)

from factories import smooth_curve

E2 = mf.euclidean(2)


def _same_partition(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return all((a[i] == a[j]) == (b[i] == b[j]) for i in range(a.size) for j in range(a.size))


class TestShapeDistance:
    def test_zero_for_same_curve(self):
        c = smooth_curve(E2, 12, np.random.default_rng(0))
        assert shape_distance(c, c) == 0.0

    def test_translation(self):
        c = smooth_curve(E2, 12, np.random.default_rng(1))
        u = np.array([0.9, 1.2])
        assert shape_distance(c, c.with_points(c.points + u)) == pytest.approx(1.5, abs=1e-12)

    def test_reparameterization_invariance(self):
        a0, a1, u = translated_reparameterized(20)
        assert shape_distance(a0, a1) == pytest.approx(np.linalg.norm(u), rel=0.05)

    def test_nearly_symmetric(self):
        a0, a1, _ = translated_reparameterized(20, shift=[0.3, 0.2], strength=1.0)
        d01, d10 = shape_distance(a0, a1), shape_distance(a1, a0)
        assert abs(d01 - d10) < 0.02 * max(d01, d10)


class TestKarcher:
    def test_single_curve(self):
        c = smooth_curve(E2, 8, np.random.default_rng(2))
        res = karcher_mean([c], full=True)
        assert res.mean is c and res.converged

    def test_symmetric_translates(self):
        c = smooth_curve(E2, 12, np.random.default_rng(3))
        u = np.array([0.4, -0.3])
        res = karcher_mean([c.with_points(c.points + u), c.with_points(c.points - u)], full=True)
        assert res.converged
        assert np.abs(res.mean.points - c.points).max() < 1e-4

    def test_objective_never_accepted_higher(self):
        curves = [translated_reparameterized(12, shift=s, strength=g)[1]
                  for s, g in (([0.2, 0.0], 1.0), ([0.0, 0.3], -1.0), ([-0.1, 0.1], 0.5))]
        res = karcher_mean(curves, MatchConfig(steps=20), max_iter=6, full=True)
        assert all(b <= a * (1 + 1e-6) for a, b in zip(res.objectives, res.objectives[1:]))
        assert len(res.representatives) == len(curves)

    def test_incompatible(self):
        with pytest.raises(DomainError):
            karcher_mean([smooth_curve(E2, 5, np.random.default_rng(0)),
                          smooth_curve(E2, 6, np.random.default_rng(0))])
        with pytest.raises(DomainError):
            karcher_mean([])


class TestDistanceMatrix:
    def test_symmetrized_with_zero_diagonal(self):
        dm = DistanceMatrix(["a", "b"], [[1.0, 2.0], [4.0, 3.0]])
        np.testing.assert_array_equal(dm.values, [[0.0, 3.0], [3.0, 0.0]])

    @pytest.mark.parametrize("labels,values", [(["a"], [[0.0, 1.0]]),
                                               (["a", "b"], [[0.0, -1.0], [-1.0, 0.0]])])
    def test_rejects(self, labels, values):
        with pytest.raises(DomainError):
            DistanceMatrix(labels, values)

    def test_translates(self):
        c = smooth_curve(E2, 10, np.random.default_rng(4))
        curves = [c.with_points(c.points + [s, 0.0]) for s in (0.0, 0.5, 2.0)]
        dm = distance_matrix(curves, labels=["x", "y", "z"])
        np.testing.assert_allclose(dm.values, [[0, 0.5, 2], [0.5, 0, 1.5], [2, 1.5, 0]], atol=1e-12)
        assert dm.labels == ["x", "y", "z"]

    def test_needs_two(self):
        with pytest.raises(DomainError):
            distance_matrix([smooth_curve(E2, 5, np.random.default_rng(0))])


def _random_distances(rng, N):
    pts = rng.normal(size=(N, 3))
    return np.linalg.norm(pts[:, None] - pts[None], axis=-1)


class TestCluster:
    @pytest.mark.parametrize("method", LINKAGES)
    def test_heights_match_scipy(self, method):
        D = _random_distances(np.random.default_rng(5), 9)
        _, dend = cluster(D, linkage=method)
        ref = scipy_linkage(squareform(D, checks=False), method=method)
        np.testing.assert_allclose(dend.heights(), ref[:, 2], rtol=1e-12)
        np.testing.assert_array_equal(dend.to_linkage_matrix()[:, 3], ref[:, 3])

    @given(seed=st.integers(0, 10_000), k=st.integers(1, 8),
           method=st.sampled_from(LINKAGES))
    @settings(max_examples=40, deadline=None)
    def test_cut_matches_scipy(self, seed, k, method):
        D = _random_distances(np.random.default_rng(seed), 8)
        labels, dend = cluster(D, k=k, linkage=method)
        ref = fcluster(scipy_linkage(squareform(D, checks=False), method=method), k, "maxclust")
        assert len(set(labels)) == k
        assert _same_partition(labels, ref)

    def test_height_cut(self):
        D = np.array([[0, 1, 5, 5], [1, 0, 5, 5], [5, 5, 0, 2], [5, 5, 2, 0]], dtype=float)
        labels, _ = cluster(D, height=1.5)
        np.testing.assert_array_equal(labels, [0, 0, 1, 2])
        labels, _ = cluster(D, height=3.0)
        np.testing.assert_array_equal(labels, [0, 0, 1, 1])
        labels, dend = cluster(D)
        np.testing.assert_array_equal(labels, [0, 0, 0, 0])
        assert dend.cut(k=4).tolist() == [0, 1, 2, 3]

    def test_bad_arguments(self):
        D = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(DomainError):
            cluster(D, linkage="ward")
        with pytest.raises(DomainError):
            cluster(D, k=3)
        with pytest.raises(DomainError):
            cluster(D, k=1, height=0.5)
