"""Tests for the vertical/horizontal splitting, horizontal paths, optimal
matching and the dynamic-programming baseline."""

import numpy as np
import pytest

from geomatch import manifolds as mf
from geomatch.curves import CurvePath, CurveTangent, DiscreteCurve, metric_gn, path_length
from geomatch.errors import DomainError
from geomatch.generators import random_smooth_pair, translated_reparameterized
from geomatch.geodesics import exp_map, flat_geodesic, geodesic_length
from geomatch.matching import (MatchConfig, ShapeSpline, decompose_tangent, dp_match,
                               horizontal_part_of_path, horizontality_defect, optimal_match,
                               verticality_ratio)
from geomatch.curves import edge_frame

from factories import MANIFOLDS, random_field, smooth_curve, smooth_field

E2 = mf.euclidean(2)


def _vertical(curve, z):
    """Tangent z_k v_k with v_k the unit edge direction (z_n unused)."""
    ef = edge_frame(curve)
    w = np.zeros_like(curve.points)
    w[:-1] = z[:-1, None] * ef.v
    return CurveTangent.from_frame(curve, w)


class TestDecomposition:
    @pytest.mark.parametrize("name", sorted(MANIFOLDS))
    def test_orthogonal_and_residual(self, name):
        rng = np.random.default_rng(0)
        M = MANIFOLDS[name]
        for _ in range(20):
            c = smooth_curve(M, 9, rng, amp=0.25)
            w = random_field(c, rng)
            dec = decompose_tangent(c, w)
            assert dec.m[0] == 0 and dec.m[-1] == 0
            assert dec.residual < 1e-10
            nh = np.sqrt(metric_gn(c, dec.w_hor))
            for _ in range(10):
                z = np.r_[0.0, rng.normal(size=c.n - 1), 0.0]
                zv = _vertical(c, z)
                assert abs(metric_gn(c, dec.w_hor, zv)) < 1e-8 * nh * np.sqrt(metric_gn(c, zv))
            defect = horizontality_defect(edge_frame(c), dec.w_hor.frame)
            assert np.abs(defect).max() < 1e-8 * (1 + np.abs(w.frame).max())

    @pytest.mark.parametrize("name", sorted(MANIFOLDS))
    def test_matches_gram_least_squares(self, name):
        # brute force: project w on span{e_k v_k} in the G inner product
        rng = np.random.default_rng(1)
        c = smooth_curve(MANIFOLDS[name], 7, rng, amp=0.25)
        w = random_field(c, rng)
        basis = [_vertical(c, np.eye(c.n + 1)[k]) for k in range(1, c.n)]
        G = np.array([[metric_gn(c, a, b) for b in basis] for a in basis])
        rhs = np.array([metric_gn(c, w, b) for b in basis])
        m = np.linalg.solve(G, rhs)
        np.testing.assert_allclose(decompose_tangent(c, w).m[1:-1], m, atol=1e-9)

    def test_straight_five_point_curve(self):
        c = DiscreteCurve(E2, np.c_[np.linspace(0, 1, 5), np.zeros(5)])
        w = random_field(c, np.random.default_rng(2))
        dec = decompose_tangent(c, w)
        assert abs(metric_gn(c, dec.w_hor, dec.w_ver)) < 1e-10

    def test_horizontal_input_has_no_vertical_part(self):
        rng = np.random.default_rng(3)
        c = smooth_curve(MANIFOLDS["sphere2"], 8, rng)
        hor = decompose_tangent(c, random_field(c, rng)).w_hor
        assert np.abs(decompose_tangent(c, hor).m).max() < 1e-10

    def test_translation_is_horizontal(self):
        c = smooth_curve(E2, 8, np.random.default_rng(4))
        w = CurveTangent(c, np.tile([0.3, -1.0], (9, 1)))
        np.testing.assert_allclose(decompose_tangent(c, w).m, 0.0, atol=1e-14)

    @pytest.mark.parametrize("name", sorted(MANIFOLDS))
    def test_vertical_input_has_no_horizontal_part(self, name):
        rng = np.random.default_rng(5)
        c = smooth_curve(MANIFOLDS[name], 8, rng)
        z = np.r_[0.0, rng.normal(size=c.n - 1), 0.0]
        dec = decompose_tangent(c, _vertical(c, z))
        assert np.sqrt(max(metric_gn(c, dec.w_hor), 0.0)) < 1e-8
        np.testing.assert_allclose(dec.m, z, atol=1e-10)

    def test_needs_two_edges(self):
        c = DiscreteCurve(E2, [[0, 0], [1, 0]])
        with pytest.raises(DomainError):
            decompose_tangent(c, CurveTangent.zeros(c))


class TestVerticality:
    def test_translation_path_is_horizontal(self):
        c = smooth_curve(E2, 10, np.random.default_rng(6))
        s = np.linspace(0, 1, 11)
        p = CurvePath(E2, c.points[None] + s[:, None, None] * np.array([0.5, 0.2]))
        assert np.all(verticality_ratio(p) < 1e-6)

    def test_sliding_path_is_vertical(self):
        t = np.linspace(0, 1, 11)
        pts = []
        for s in np.linspace(0, 1, 6):
            u = t + 0.05 * s * np.sin(np.pi * t)
            pts.append(np.c_[u, np.zeros_like(u)])
        r = verticality_ratio(CurvePath(E2, np.array(pts)))
        assert np.all(np.isinf(r))


class TestShapeSpline:
    @pytest.mark.parametrize("name", sorted(MANIFOLDS))
    def test_interpolates_nodes_and_stays_on_model(self, name):
        M = MANIFOLDS[name]
        c = smooth_curve(M, 9, np.random.default_rng(7), amp=0.3)
        sp = ShapeSpline(c)
        np.testing.assert_allclose(sp(np.linspace(0, 1, 10)), c.points, rtol=0, atol=1e-15)
        dense = sp(np.linspace(0, 1, 301))
        mf.check_point(M, dense, renormalize=False)


def _sliding_path(m=20, n=12):
    """Points sliding along a fixed flat curve: a pure reparameterization."""
    shape = lambda u: np.c_[u, 0.4 * np.sin(2.5 * u)]
    t = np.linspace(0, 1, n + 1)
    pts = []
    for s in np.linspace(0, 1, m + 1):
        pts.append(shape(t + 0.25 * s * np.sin(np.pi * t)))
    return CurvePath(E2, np.array(pts))


class TestHorizontalPart:
    def test_horizontal_input_unchanged(self):
        c = smooth_curve(E2, 10, np.random.default_rng(8))
        s = np.linspace(0, 1, 21)
        p = CurvePath(E2, c.points[None] + s[:, None, None] * np.array([0.4, 0.7]))
        h = horizontal_part_of_path(p)
        np.testing.assert_allclose(h.meta["phi"], np.linspace(0, 1, 11), atol=1e-12)
        assert np.abs(h.points - p.points).max() < 1e-8
        assert h.kind == "horizontal"

    def test_pure_reparameterization_collapses(self):
        p = _sliding_path()
        h = horizontal_part_of_path(p)
        assert path_length(h) < 0.05 * path_length(p)
        np.testing.assert_array_equal(h.points[0], p.points[0])

    def test_bracket_mode_converges_with_upsampling(self):
        # nearest-sample inversion jitters; only dense sampling removes it
        p = _sliding_path()
        lengths = [path_length(horizontal_part_of_path(p, upsample=N, mode="bracket"))
                   for N in (120, 1000, 10000)]
        assert lengths[0] > lengths[1] > lengths[2]
        assert lengths[2] < 0.1 * path_length(p)

    @pytest.mark.parametrize("name", sorted(MANIFOLDS))
    def test_never_longer(self, name):
        rng = np.random.default_rng(9)
        M = MANIFOLDS[name]
        for _ in range(3):
            c = smooth_curve(M, 48, rng)
            w = smooth_field(c, rng, 0.3)
            p = exp_map(c, w, 30)
            h = horizontal_part_of_path(p)
            assert path_length(h) <= path_length(p) + 1e-6

    def test_end_curve_on_end_shape(self):
        p = _sliding_path()
        h = horizontal_part_of_path(p)
        sp = ShapeSpline(p.end)
        np.testing.assert_allclose(h.points[-1], sp(h.meta["t_end"]), atol=1e-14)

    def test_bad_mode(self):
        with pytest.raises(DomainError):
            horizontal_part_of_path(_sliding_path(), mode="nearest")


class TestOptimalMatch:
    def test_identical_curves(self):
        c = smooth_curve(E2, 10, np.random.default_rng(10))
        geo, mt = optimal_match(c, c)
        assert mt.iterations == 1
        assert geodesic_length(geo) == 0.0
        np.testing.assert_array_equal(mt.phi, np.linspace(0, 1, 11))

    def test_translated_same_parameterization(self):
        c = smooth_curve(E2, 12, np.random.default_rng(11))
        u = np.array([0.6, -0.8])
        geo, mt = optimal_match(c, c.with_points(c.points + u))
        assert geodesic_length(geo) == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(mt.phi, np.linspace(0, 1, 13), atol=1e-12)

    def test_translated_reparameterized(self):
        a0, a1, u = translated_reparameterized(20)
        geo, mt = optimal_match(a0, a1)
        unmatched = geodesic_length(flat_geodesic(a0, a1))
        assert abs(mt.length_history[-1] - np.linalg.norm(u)) < 0.05 * np.linalg.norm(u)
        assert mt.length_history[-1] < unmatched
        assert all(b <= a + 1e-8 for a, b in zip(mt.length_history, mt.length_history[1:]))
        assert mt.phi[0] == 0.0 and mt.phi[-1] == 1.0
        assert np.all(np.diff(mt.phi) >= -1e-12)
        np.testing.assert_allclose(mt.matched.points[[0, -1]], a1.points[[0, -1]], atol=1e-9)

    def test_random_pair_ratio_reduced(self):
        a0, a1 = random_smooth_pair(20, 2, seed=2)
        geo, mt = optimal_match(a0, a1)
        assert mt.reason == "horizontal"
        assert mt.ratio_history[-1] < 0.05 < mt.ratio_history[0]
        assert max(verticality_ratio(geo)) == pytest.approx(mt.ratio_history[-1])

    def test_sphere_pair_monotone(self):
        rng = np.random.default_rng(12)
        a0 = smooth_curve(MANIFOLDS["sphere2"], 10, rng, amp=0.1)
        a1 = smooth_curve(MANIFOLDS["sphere2"], 10, rng, amp=0.1)
        geo, mt = optimal_match(a0, a1, MatchConfig(steps=30, max_iter=4))
        assert all(b <= a + 1e-8 for a, b in zip(mt.length_history, mt.length_history[1:]))
        assert mt.matched.points[0] == pytest.approx(a1.points[0])
        assert mt.matched.points[-1] == pytest.approx(a1.points[-1])

    def test_incompatible(self):
        a = smooth_curve(E2, 5, np.random.default_rng(0))
        b = smooth_curve(E2, 6, np.random.default_rng(0))
        with pytest.raises(DomainError):
            optimal_match(a, b)

    @pytest.mark.parametrize("kw", [{"steps": 0}, {"max_iter": 0}, {"geodesic": "rk"}])
    def test_bad_config(self, kw):
        with pytest.raises(DomainError):
            MatchConfig(**kw)


class TestDp:
    def test_identical_curves_diagonal(self):
        c = smooth_curve(E2, 10, np.random.default_rng(13))
        geo, mt = dp_match(c, c)
        assert all(i == j for i, j in geo.meta["dp"].path)
        np.testing.assert_allclose(mt.phi, np.linspace(0, 1, 11), atol=1e-14)
        assert geodesic_length(geo) == pytest.approx(0.0, abs=1e-12)

    def test_translated_pair(self):
        c = smooth_curve(E2, 10, np.random.default_rng(14))
        u = np.array([0.3, 0.4])
        geo, mt = dp_match(c, c.with_points(c.points + u))
        np.testing.assert_allclose(mt.phi, np.linspace(0, 1, 11), atol=1e-12)
        assert geodesic_length(geo) == pytest.approx(0.5, abs=1e-10)

    def test_path_monotone_and_shorter(self):
        a0, a1, _ = translated_reparameterized(20)
        geo, mt = dp_match(a0, a1, square=5)
        path = np.array(geo.meta["dp"].path)
        assert np.all(np.diff(path, axis=0) >= 1)
        assert np.all(np.diff(path, axis=0) <= 5)
        assert geodesic_length(geo) < geodesic_length(flat_geodesic(a0, a1))

    def test_curved_runs(self):
        rng = np.random.default_rng(15)
        a0 = smooth_curve(MANIFOLDS["hyperbolic2"], 8, rng)
        a1 = smooth_curve(MANIFOLDS["hyperbolic2"], 8, rng)
        geo, mt = dp_match(a0, a1, square=3, cfg=MatchConfig(steps=20))
        assert np.all(np.diff(mt.phi) > 0)
        assert geodesic_length(geo) > 0
