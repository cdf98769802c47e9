"""
Geometry of the three base spaces
=================================

Exponential and logarithm maps, distances and parallel transport on the
Euclidean plane, the unit sphere and the hyperbolic half-plane.
"""

import numpy as np

from geomatch import manifolds as mf

rng = np.random.default_rng(0)

for M, x in [(mf.euclidean(2), np.array([0.0, 0.0])),
             (mf.sphere2(), np.array([0.0, 0.0, 1.0])),
             (mf.hyperbolic_plane(), np.array([0.0, 1.0]))]:
    # a tangent vector of length 1.2 at x
    v = mf.project_tangent(M, x, rng.normal(size=x.size)) if M.kind == "sphere" \
        else mf.from_frame(M, x, rng.normal(size=x.size))
    v = 1.2 * v / mf.riemannian_norm(M, x, v)
    y = mf.exp_point(M, x, v)
    back = mf.log_point(M, x, y)
    print(f"{M.tag:12s} exp(x, v) = {np.round(y, 4)}  distance {mf.distance(M, x, y):.6f}")
    print(f"{'':12s} log roundtrip error {np.abs(back - v).max():.1e}")

    # transport keeps lengths; on curved spaces the frame rotates
    w = v if M.kind == "sphere" else mf.from_frame(M, x, np.eye(x.size)[0])
    tw = mf.parallel_transport(M, x, y, w)
    print(f"{'':12s} |w| = {mf.riemannian_norm(M, x, w):.6f} -> |P w| = "
          f"{mf.riemannian_norm(M, y, tw):.6f}")

# Jacobi coefficients: a(t), b(t) describe how a Jacobi field spreads
for K in (1, 0, -1):
    a, b, _ = mf.jacobi_coefficients(np.array([1.0]), K, 1.0)
    print(f"curvature {K:+d}: a = {a[0]:.5f}, b = {b[0]:.5f}")
