"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (echoed in the terminal summary) and then
asserts the same condition, so ``pytest tests/test_acceptance.py -v`` shows
both the verdicts and the measured values.
"""

import time

import numpy as np
import pytest

from geomatch import manifolds as mf
from geomatch.convergence import energy_convergence_study
from geomatch.curves import CurveTangent, DiscreteCurve, metric_gn, path_length, path_speeds
from geomatch.generators import (circle_vs_segment, h2_segments, random_smooth_pair,
                                 translated_reparameterized, turn_pair, two_bundles)
from geomatch.geodesics import (exp_map, flat_geodesic, geodesic_length, geodesic_shoot,
                                jacobi_inverse, jacobi_propagate)
from geomatch.matching import (MatchConfig, decompose_tangent, dp_match,
                               horizontal_part_of_path, optimal_match, verticality_ratio)
from geomatch.statistics import cluster, distance_matrix, karcher_mean

import oracles
from factories import MANIFOLDS, random_field, random_points, random_tangents

pytestmark = pytest.mark.acceptance


def _bump_curve(M, n, rng, amp):
    t = np.linspace(0.0, 1.0, n + 1)
    c = amp * sum(rng.normal(size=2) * np.sin((j + 1) * np.pi * t[:, None]) / (j + 1) ** 2
                  for j in range(3))
    if M.kind == "sphere":
        lat, lon = 0.2 + 0.4 * t + c[:, 0], 1.0 * t + c[:, 1]
        return DiscreteCurve(M, np.c_[np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon),
                                      np.sin(lat)])
    if M.kind == "hyperbolic":
        return DiscreteCurve(M, np.c_[-0.5 + t + c[:, 0], 1.0 + 0.5 * t + c[:, 1]])
    return DiscreteCurve(M, np.c_[t + c[:, 0], 0.3 * np.sin(3 * t) + c[:, 1]])


def _cosine_field(curve, rng, scale, tangential=0.0):
    """Smooth field; ``tangential`` adds a reparameterizing component."""
    M = curve.manifold
    t = np.linspace(0.0, 1.0, curve.n + 1)
    w = scale * sum(rng.normal(size=M.coord_dim) * np.cos(j * np.pi * t[:, None]) / (j + 1) ** 2
                    for j in range(3))
    P = curve.points
    if M.kind == "sphere":
        w = mf.to_frame(M, P, mf.project_tangent(M, P, w))
    if tangential:
        tau = mf.to_frame(M, P[:-1], mf.log_point(M, P[:-1], P[1:]))
        tv = np.r_[tau, tau[-1:]]
        tv /= np.linalg.norm(tv, axis=1, keepdims=True)
        w = w + tangential * np.sin(np.pi * t)[:, None] * tv
    return CurveTangent.from_frame(curve, w)


def test_criterion_1_flat_srv_oracle(acceptance):
    t0 = time.perf_counter()
    worst, iters = 0.0, 0
    for d in (2, 3):
        for seed in range(10):
            a0, a1 = random_smooth_pair(30, d, seed)
            geo = geodesic_shoot(a0, a1, 100)
            iters = max(iters, geo.meta["iterations"])
            for j in range(geo.m + 1):
                ref = oracles.flat_srv_geodesic(a0.points, a1.points, j / geo.m)
                worst = max(worst, float(np.linalg.norm(geo.points[j] - ref, axis=1).max()))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-5 and iters <= 5 and elapsed < 10
    acceptance(1, "flat shooting matches SRV-linear geodesic", ok,
               f"max distance {worst:.2e}, max iterations {iters}, {elapsed:.1f} s")
    assert ok


def test_criterion_2_energy_rate(acceptance):
    t0 = time.perf_counter()
    table = energy_convergence_study("sphere-rotating-arc", [8, 16, 32, 64])
    elapsed = time.perf_counter() - t0
    ok = -1.6 <= table.slope <= -0.7 and elapsed < 30
    acceptance(2, "discrete energy converges at first order", ok,
               f"slope {table.slope:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_3_jacobi_consistency(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    fd_err, inv_err = 0.0, 0.0
    eps = 1e-4
    for name in ("sphere2", "hyperbolic2"):
        M = MANIFOLDS[name]
        for _ in range(10):
            a = _bump_curve(M, 15, rng, 0.3)
            w = _cosine_field(a, rng, 0.5)
            dw = _cosine_field(a, rng, 1.0)
            geo = exp_map(a, w, 100)
            J1, _ = jacobi_propagate(geo, CurveTangent.zeros(a), dw)
            plus = exp_map(a, w + dw * eps, 100).end.points
            minus = exp_map(a, w - dw * eps, 100).end.points
            end = geo.end.points
            fd = (mf.to_frame(M, end, mf.log_point(M, end, plus))
                  - mf.to_frame(M, end, mf.log_point(M, end, minus))) / (2 * eps)
            fd_err = max(fd_err, np.linalg.norm(J1.frame - fd) / np.linalg.norm(fd))
            dJ = jacobi_inverse(geo, J1)
            J1b, _ = jacobi_propagate(geo, CurveTangent.zeros(a), dJ)
            inv_err = max(inv_err, np.linalg.norm(J1b.frame - J1.frame) / np.linalg.norm(J1.frame))
    elapsed = time.perf_counter() - t0
    ok = fd_err < 1e-2 and inv_err < 1e-6 and elapsed < 60
    acceptance(3, "Jacobi fields match finite differences", ok,
               f"relative error {fd_err:.2e}, inverse roundtrip {inv_err:.2e}, {elapsed:.1f} s")
    assert ok


def test_criterion_4_horizontality(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    ortho = 0.0
    for M in MANIFOLDS.values():
        for _ in range(100):
            c = _bump_curve(M, 10, rng, 0.25) if M.coord_dim == 2 or M.kind == "sphere" else \
                DiscreteCurve(M, np.cumsum(rng.normal(size=(11, 3)), axis=0))
            dec = decompose_tangent(c, random_field(c, rng))
            gh, gv = metric_gn(c, dec.w_hor), metric_gn(c, dec.w_ver)
            if gh > 0 and gv > 0:
                ortho = max(ortho, abs(metric_gn(c, dec.w_hor, dec.w_ver)) / np.sqrt(gh * gv))
    excess, shortest = -np.inf, np.inf
    rng = np.random.default_rng(11)
    for name in ("euclidean2", "sphere2", "hyperbolic2"):
        M = MANIFOLDS[name]
        for _ in range(30):
            a = _bump_curve(M, 15, rng, 0.08)
            w = _cosine_field(a, rng, 0.3, 0.3 * rng.normal())
            p = exp_map(a, w, 30)
            L0, L1 = path_length(p), path_length(horizontal_part_of_path(p))
            excess = max(excess, L1 - L0)
            shortest = min(shortest, L1 / L0)
    elapsed = time.perf_counter() - t0
    ok = ortho < 1e-8 and excess <= 1e-6 and elapsed < 30
    acceptance(4, "horizontal/vertical splitting and horizontal paths", ok,
               f"orthogonality {ortho:.2e}, worst length change {excess:+.2e}, "
               f"best ratio {shortest:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_5_optimal_matching(acceptance):
    t0 = time.perf_counter()
    a0, a1, u = translated_reparameterized(30)
    geo, match = optimal_match(a0, a1)
    elapsed = time.perf_counter() - t0
    L, norm_u = geodesic_length(geo), float(np.linalg.norm(u))
    hist = match.length_history
    final_ratio = float(np.max(verticality_ratio(geo)))
    ok = (abs(L - norm_u) < 0.05 * norm_u
          and final_ratio < 0.05 and final_ratio < match.ratio_history[0]
          and all(b <= a for a, b in zip(hist, hist[1:])) and elapsed < 60)
    acceptance(5, "optimal matching straightens the reparameterization", ok,
               f"length {L:.4f} vs |u| {norm_u:.4f}, ratio {match.ratio_history[0]:.3f} -> "
               f"{final_ratio:.4f}, {match.iterations} iterations, {elapsed:.1f} s")
    assert ok


def test_criterion_6_om_vs_dp(acceptance):
    t0 = time.perf_counter()
    pairs = {
        "circle-segment": circle_vs_segment(30),
        "translated": translated_reparameterized(30)[:2],
        "translated3d": translated_reparameterized(30, 3)[:2],
        "turns": turn_pair(30),
        "turns-mild": turn_pair(30, 0.6, 0.3),
    }
    worst, details, ok = 0.0, [], True
    for name, (a0, a1) in pairs.items():
        om_geo, _ = optimal_match(a0, a1)
        dp_geo, _ = dp_match(a0, a1, square=7)
        raw = geodesic_length(flat_geodesic(a0, a1))
        l_om, l_dp = geodesic_length(om_geo), geodesic_length(dp_geo)
        rel = abs(l_om - l_dp) / l_dp
        worst = max(worst, rel)
        ok &= rel < 0.01 and l_om < raw and l_dp < raw
        details.append(f"{name} {l_om:.4f}/{l_dp:.4f}/{raw:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    acceptance(6, "optimal matching agrees with dynamic programming", ok,
               f"worst relative gap {worst:.2e}; OM/DP/unmatched: {'; '.join(details)}; "
               f"{elapsed:.1f} s")
    assert ok


def test_criterion_7_speed_stability(acceptance):
    t0 = time.perf_counter()
    spreads = []
    for n in (20, 60, 180):
        a0, a1 = h2_segments(n)
        sp = path_speeds(geodesic_shoot(a0, a1, n))
        spreads.append(float((sp.max() - sp.min()) / sp.mean()))
    elapsed = time.perf_counter() - t0
    ok = spreads[0] > spreads[1] > spreads[2] and elapsed < 120
    acceptance(7, "geodesic speed spread shrinks under refinement", ok,
               f"spreads {', '.join(f'{s:.2e}' for s in spreads)}, {elapsed:.1f} s")
    assert ok


def test_criterion_8_statistics(acceptance):
    t0 = time.perf_counter()
    a0, _, u = translated_reparameterized(20)
    copies = [a0.with_points(a0.points + u), a0.with_points(a0.points - u)]
    mean = karcher_mean(copies)
    mean_err = float(np.abs(mean.points - a0.points).max())
    curves, truth = two_bundles()
    dm = distance_matrix(curves, MatchConfig(steps=30))
    labels, _ = cluster(dm, k=2)
    exact = all((labels[i] == labels[j]) == (truth[i] == truth[j])
                for i in range(len(truth)) for j in range(len(truth)))
    sym = np.array_equal(dm.values, dm.values.T) and np.all(np.diag(dm.values) == 0)
    elapsed = time.perf_counter() - t0
    ok = mean_err < 1e-4 and exact and sym and elapsed < 120
    acceptance(8, "Karcher mean, distance matrix and clustering", ok,
               f"mean error {mean_err:.2e}, partition {'exact' if exact else 'wrong'}, "
               f"matrix {'symmetric' if sym else 'asymmetric'}, {elapsed:.1f} s")
    assert ok


def _closed_form_jacobi(M, x, v, j0, d0):
    """J(1) from the constant-curvature coefficients and parallel transport."""
    vf, jf, df = (mf.to_frame(M, x, w) for w in (v, j0, d0))
    r = np.linalg.norm(vf, axis=1, keepdims=True)
    u = vf / r
    tang = lambda w: np.sum(w * u, axis=1, keepdims=True) * u
    a, b, _ = mf.jacobi_coefficients(r[:, 0], M.curvature, 1.0)
    back = tang(jf) + a[:, None] * (jf - tang(jf)) + tang(df) + b[:, None] * (df - tang(df))
    y = mf.exp_point(M, x, v)
    P = mf.transport_matrix(M, x, y)
    return y, mf.from_frame(M, y, (P @ back[..., None])[..., 0])


def test_criterion_9_kernel_exactness(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    N = 1000
    roundtrip = isometry = rk4 = 0.0
    for name, M in MANIFOLDS.items():
        x = random_points(M, N, rng)
        v = random_tangents(M, x, rng)
        scale = rng.uniform(0.05, 3.0, N) / mf.riemannian_norm(M, x, v)
        v = v * scale[:, None]
        y = mf.exp_point(M, x, v)
        back = mf.log_point(M, x, y)
        roundtrip = max(roundtrip, float(mf.riemannian_norm(M, x, back - v).max()))
        w = random_tangents(M, x, rng)
        tw = mf.parallel_transport(M, x, y, w)
        isometry = max(isometry, float(np.abs(mf.riemannian_norm(M, y, tw)
                                              - mf.riemannian_norm(M, x, w)).max()))
        if name in ("sphere2", "hyperbolic2"):
            j0, d0 = random_tangents(M, x, rng), random_tangents(M, x, rng)
            y1, J = _closed_form_jacobi(M, x, v, j0, d0)
            ode = oracles.sphere_jacobi if M.kind == "sphere" else oracles.h2_jacobi
            y2, J2 = ode(x, v, j0, d0)
            rk4 = max(rk4, float(mf.riemannian_norm(M, y1, J - J2).max()),
                      float(mf.distance(M, y1, y2).max()))
    elapsed = time.perf_counter() - t0
    ok = roundtrip < 1e-8 and isometry < 1e-10 and rk4 < 1e-6 and elapsed < 10
    acceptance(9, "kernel exp/log, transport and closed-form Jacobi fields", ok,
               f"roundtrip {roundtrip:.2e}, isometry {isometry:.2e}, RK4 {rk4:.2e}, "
               f"{elapsed:.1f} s")
    assert ok
