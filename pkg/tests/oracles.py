"""Independent numerical oracles written directly from the model metrics.

Nothing here calls the package's closed forms: geodesics, Jacobi fields and
parallel transport are integrated with classical RK4 on the coordinate ODEs.
"""

import numpy as np


def rk4(rhs, state, t1=1.0, steps=1000):
    """Classical fourth-order Runge-Kutta on ``[0, t1]`` (vectorized state)."""
    h = t1 / steps
    y = np.array(state, dtype=float)
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


# ---------------------------------------------------------------------------
# sphere, ambient coordinates: gamma'' = -|gamma'|^2 gamma

def _sphere_rhs(y):
    g, dg, J, dJ = y[..., 0:3], y[..., 3:6], y[..., 6:9], y[..., 9:12]
    speed2 = np.sum(dg * dg, axis=-1, keepdims=True)
    ddg = -speed2 * g
    # linearization of the geodesic equation along the variation
    ddJ = -speed2 * J - 2.0 * np.sum(dg * dJ, axis=-1, keepdims=True) * g
    return np.concatenate([dg, ddg, dJ, ddJ], axis=-1)


def sphere_jacobi(x, v, j0, d0, steps=1000):
    """Jacobi field at time 1 from value ``j0`` and covariant derivative ``d0``.

    All vectors are ambient and tangent at ``x``.  Returns ``(gamma(1), J(1))``.
    """
    # the ambient derivative of a tangent field carries a normal component
    dj0 = d0 - np.sum(j0 * v, axis=-1, keepdims=True) * x
    y = rk4(_sphere_rhs, np.concatenate([x, v, j0, dj0], axis=-1), steps=steps)
    return y[..., 0:3], y[..., 6:9]


# ---------------------------------------------------------------------------
# half-plane, (x, y) coordinates with metric (dx^2 + dy^2) / y^2

def _christoffel(p, a, b):
    """Gamma(a, b) of the half-plane metric at ``p``."""
    y = p[..., 1:2]
    gx = -(a[..., 0:1] * b[..., 1:2] + a[..., 1:2] * b[..., 0:1]) / y
    gy = (a[..., 0:1] * b[..., 0:1] - a[..., 1:2] * b[..., 1:2]) / y
    return np.concatenate([gx, gy], axis=-1)


def _h2_rhs(s):
    g, dg, J, dJ = s[..., 0:2], s[..., 2:4], s[..., 4:6], s[..., 6:8]
    y = g[..., 1:2]
    ux, uy = dg[..., 0:1], dg[..., 1:2]
    ddg = -_christoffel(g, dg, dg)
    jx, jy = J[..., 0:1], J[..., 1:2]
    djx, djy = dJ[..., 0:1], dJ[..., 1:2]
    # d/da of (2 ux uy / y, (uy^2 - ux^2) / y)
    ddjx = 2.0 * (djx * uy + ux * djy) / y - 2.0 * ux * uy * jy / y**2
    ddjy = 2.0 * (uy * djy - ux * djx) / y - (uy * uy - ux * ux) * jy / y**2
    return np.concatenate([dg, ddg, dJ, np.concatenate([ddjx, ddjy], axis=-1)], axis=-1)


def h2_geodesic(x, v, steps=1000):
    """Endpoint of the half-plane geodesic by RK4 (model components)."""
    z = np.zeros_like(x)
    s = rk4(_h2_rhs, np.concatenate([x, v, z, z], axis=-1), steps=steps)
    return s[..., 0:2]


def h2_jacobi(x, v, j0, d0, steps=1000):
    """Half-plane analogue of :func:`sphere_jacobi` (model components)."""
    dj0 = d0 - _christoffel(x, v, j0)
    s = rk4(_h2_rhs, np.concatenate([x, v, j0, dj0], axis=-1), steps=steps)
    return s[..., 0:2], s[..., 4:6]


def h2_transport(x, v, w, steps=1000):
    """Parallel transport of ``w`` along the geodesic ``t -> exp_x(t v)``.

    Integrates ``w' = -Gamma(gamma', w)`` together with the geodesic.
    """

    def rhs(s):
        g, dg, ww = s[..., 0:2], s[..., 2:4], s[..., 4:6]
        return np.concatenate([dg, -_christoffel(g, dg, dg), -_christoffel(g, dg, ww)], axis=-1)

    s = rk4(rhs, np.concatenate([x, v, w], axis=-1), steps=steps)
    return s[..., 0:2], s[..., 4:6]


# ---------------------------------------------------------------------------
# flat reference geodesic in SRV coordinates

def flat_srv_geodesic(p0, p1, s):
    """Points at time ``s`` of the straight line between the SRV codes of two
    Euclidean polylines (``x0`` and every ``q_k`` interpolated linearly)."""
    n = p0.shape[0] - 1

    def code(p):
        tau = np.diff(p, axis=0)
        r = np.linalg.norm(tau, axis=1, keepdims=True)
        return np.sqrt(n) * tau / np.sqrt(r)

    q = (1 - s) * code(p0) + s * code(p1)
    x0 = (1 - s) * p0[0] + s * p1[0]
    tau = np.linalg.norm(q, axis=1, keepdims=True) * q / n
    return np.vstack([x0, x0 + np.cumsum(tau, axis=0)])
