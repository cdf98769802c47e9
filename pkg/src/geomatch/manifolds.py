"""Geometry of the three constant-curvature base manifolds.

Points and tangent vectors are plain numpy arrays in *model coordinates*:

* ``euclidean:d`` -- Cartesian coordinates in R^d, curvature 0;
* ``hyperbolic2`` -- upper half-plane coordinates ``(u, y)`` with ``y > 0`` and
  metric ``(du^2 + dy^2) / y^2``, curvature -1;
* ``sphere2`` -- unit vectors of R^3 (tangent vectors are ambient vectors
  orthogonal to the base point), curvature +1.

All functions broadcast over leading axes, so a whole discrete curve (shape
``(n+1, D)``) can be processed in one call.

The curve-level code works with *frame components*: coordinates of a tangent
vector in an orthonormal frame of the tangent space.  For the Euclidean and
spherical models these coincide with the model coordinates; in the half-plane
the frame ``(y d/du, y d/dy)`` is used, so frame components are the model
components divided by ``y``.  In frame components every inner product is the
plain dot product, and parallel transport is an orthogonal matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InjectivityError

SERIES_CUTOFF = 1e-6
SPHERE_NORM_TOL = 1e-9

_KINDS = {"euclidean": 0, "hyperbolic": -1, "sphere": 1}


@dataclass(frozen=True)
class ManifoldSpec:
    """Which constant-curvature space a curve lives in.

    ``kind`` is one of ``"euclidean"``, ``"hyperbolic"`` (upper half-plane) or
    ``"sphere"`` (unit sphere of R^3); ``dim`` is the intrinsic dimension.
    """

    kind: str
    dim: int = 2

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "euclidean" and int(self.dim) < 1:
            raise DomainError("Euclidean dimension must be at least 1")
        if self.kind != "euclidean" and self.dim != 2:
            raise DomainError(f"{self.kind} model is two-dimensional")

    @property
    def curvature(self) -> int:
        return _KINDS[self.kind]

    @property
    def coord_dim(self) -> int:
        """Length of a coordinate vector (3 for the embedded sphere)."""
        return 3 if self.kind == "sphere" else self.dim

    @property
    def flat(self) -> bool:
        return self.kind == "euclidean"

    @property
    def tag(self) -> str:
        if self.kind == "euclidean":
            return f"euclidean:{self.dim}"
        return {"hyperbolic": "hyperbolic2", "sphere": "sphere2"}[self.kind]

    @classmethod
    def from_tag(cls, tag: str) -> "ManifoldSpec":
        tag = tag.strip()
        if tag == "hyperbolic2":
            return cls("hyperbolic")
        if tag == "sphere2":
            return cls("sphere")
        if tag.startswith("euclidean:"):
            try:
                d = int(tag.split(":", 1)[1])
            except ValueError:
                raise DomainError(f"bad manifold tag {tag!r}") from None
            return cls("euclidean", d)
        raise DomainError(f"bad manifold tag {tag!r}")

    def __str__(self):
        return self.tag


def euclidean(d: int = 2) -> ManifoldSpec:
    return ManifoldSpec("euclidean", d)


def hyperbolic_plane() -> ManifoldSpec:
    return ManifoldSpec("hyperbolic")


def sphere2() -> ManifoldSpec:
    return ManifoldSpec("sphere")


# ---------------------------------------------------------------------------
# small helpers

def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _norm(a):
    return np.sqrt(_dot(a, a))


def _sinhc(x):
    """sinh(x)/x with a series branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


def _sinc(x):
    """sin(x)/x with a series branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def _check_shapes(M: ManifoldSpec, *arrays):
    D = M.coord_dim
    for a in arrays:
        if a.shape[-1] != D:
            raise DomainError(
                f"coordinate length {a.shape[-1]} does not match {M.tag} (expected {D})"
            )


# ---------------------------------------------------------------------------
# validation

def check_point(M: ManifoldSpec, x, renormalize: bool = True) -> np.ndarray:
    """Validate point coordinates; sphere points are renormalized."""
    x = np.array(x, dtype=float)
    _check_shapes(M, x)
    if not np.all(np.isfinite(x)):
        raise DomainError("non-finite coordinates")
    if M.kind == "hyperbolic":
        if np.any(x[..., 1] <= 0):
            raise DomainError("half-plane points need y > 0")
    elif M.kind == "sphere":
        r = _norm(x)
        if np.any(r == 0):
            raise DomainError("zero vector is not a sphere point")
        if renormalize:
            # rows already unit to rounding are kept bit-for-bit
            off = np.abs(r - 1.0) > 4.0 * np.finfo(float).eps
            x = np.where(off[..., None], x / r[..., None], x)
        elif np.any(np.abs(r - 1) > SPHERE_NORM_TOL):
            raise DomainError("sphere point off the unit sphere")
    return x


def project_tangent(M: ManifoldSpec, x, v) -> np.ndarray:
    """Orthogonal projection onto the tangent space (identity off the sphere)."""
    v = np.asarray(v, dtype=float)
    if M.kind != "sphere":
        return v
    return v - _dot(x, v)[..., None] * x


def _check_tangent(M, x, v, tol=1e-6):
    _check_shapes(M, x, v)
    if M.kind == "sphere":
        off = np.abs(_dot(x, v))
        scale = 1.0 + _norm(v)
        if np.any(off > tol * scale):
            raise DomainError("vector is not tangent at the given sphere point")


# ---------------------------------------------------------------------------
# frame components

def to_frame(M: ManifoldSpec, x, v) -> np.ndarray:
    """Model components of a tangent vector -> orthonormal-frame components."""
    v = np.asarray(v, dtype=float)
    if M.kind == "hyperbolic":
        return v / np.asarray(x)[..., 1:2]
    return v


def from_frame(M: ManifoldSpec, x, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if M.kind == "hyperbolic":
        return w * np.asarray(x)[..., 1:2]
    return w


def tangent_basis(M: ManifoldSpec, x) -> np.ndarray:
    """Orthonormal basis of each tangent space, in frame components.

    Returns an array of shape ``(..., D, dim)`` whose columns are the basis
    vectors.
    """
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    if M.kind != "sphere":
        D = M.coord_dim
        return np.broadcast_to(np.eye(D), lead + (D, D)).copy()
    # pick the coordinate axis least aligned with x, then Gram-Schmidt
    idx = np.argmin(np.abs(x), axis=-1)
    axis = np.zeros_like(x)
    np.put_along_axis(axis, idx[..., None], 1.0, axis=-1)
    e1 = np.cross(x, axis)
    e1 /= _norm(e1)[..., None]
    e2 = np.cross(x, e1)
    return np.stack([e1, e2], axis=-1)


# ---------------------------------------------------------------------------
# metric

def riemannian_inner(M: ManifoldSpec, x, u, v) -> np.ndarray:
    """Riemannian inner product of two tangent vectors at ``x``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_tangent(M, x, u)
    _check_tangent(M, x, v)
    ip = _dot(u, v)
    if M.kind == "hyperbolic":
        ip = ip / x[..., 1] ** 2
    return ip


def riemannian_norm(M: ManifoldSpec, x, v) -> np.ndarray:
    return np.sqrt(np.maximum(riemannian_inner(M, x, v, v), 0.0))


def distance(M: ManifoldSpec, x, y) -> np.ndarray:
    return riemannian_norm(M, x, log_point(M, x, y))


# ---------------------------------------------------------------------------
# exponential and logarithm

def exp_point(M: ManifoldSpec, x, v) -> np.ndarray:
    """Endpoint at unit time of the geodesic from ``x`` with velocity ``v``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_shapes(M, x, v)
    if M.kind == "euclidean":
        return x + v
    if M.kind == "sphere":
        v = project_tangent(M, x, v)
        t = _norm(v)
        if np.any(t >= np.pi):
            raise InjectivityError("sphere exponential beyond the injectivity radius (|v| >= pi)")
        y = np.cos(t)[..., None] * x + _sinc(t)[..., None] * v
        return y / _norm(y)[..., None]
    # half-plane: move x to i, use the closed form of geodesics through i
    # gamma(L) = (p sinh L + i) / (cosh L - q sinh L) for a unit direction (p, q)
    y0 = x[..., 1]
    L = _norm(v) / y0
    s = _sinhc(L) / y0
    den = np.cosh(L) - v[..., 1] * s
    out = np.empty(np.broadcast(x, v).shape)
    out[..., 0] = x[..., 0] + v[..., 0] * _sinhc(L) / den
    out[..., 1] = y0 / den
    return out


def log_point(M: ManifoldSpec, x, y) -> np.ndarray:
    """Initial velocity of the minimizing geodesic from ``x`` to ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_shapes(M, x, y)
    if M.kind == "euclidean":
        return y - x
    if M.kind == "sphere":
        c = np.clip(_dot(x, y), -1.0, 1.0)
        if np.any(1.0 + c < 1e-12):
            raise InjectivityError("antipodal sphere points have no unique geodesic")
        perp = y - c[..., None] * x
        sn = _norm(perp)
        d = np.arctan2(sn, c)
        small = sn < 1e-12
        ratio = np.where(small, 1.0, d / np.where(small, 1.0, sn))
        ratio = np.where(np.all(x == y, axis=-1), 0.0, ratio)
        return project_tangent(M, x, ratio[..., None] * perp)
    return from_frame(M, x, _h2_log_frame(x, y))


def _h2_log_frame(x, y):
    """Half-plane logarithm in frame components at x."""
    wx = (y[..., 0] - x[..., 0]) / x[..., 1]
    wy = y[..., 1] / x[..., 1]
    # direction of the geodesic from i to w = wx + i wy, free of 0/0
    dx = wx
    dy = 0.5 * (wx * wx + (wy - 1.0) * (wy + 1.0))
    dn = np.sqrt(dx * dx + dy * dy)
    chord = np.sqrt(wx * wx + (wy - 1.0) ** 2)
    d = 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(wy)))
    zero = dn == 0
    scale = np.where(zero, 0.0, d / np.where(zero, 1.0, dn))
    return np.stack([scale * dx, scale * dy], axis=-1)


# ---------------------------------------------------------------------------
# parallel transport

def transport_matrix(M: ManifoldSpec, x, y) -> np.ndarray:
    """Parallel transport from ``x`` to ``y`` along the connecting geodesic.

    Returned as an orthogonal matrix acting on frame components, shape
    ``(..., D, D)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_shapes(M, x, y)
    lead = np.broadcast(x[..., 0], y[..., 0]).shape
    D = M.coord_dim
    if M.kind == "euclidean":
        return np.broadcast_to(np.eye(D), lead + (D, D)).copy()
    if M.kind == "sphere":
        c = _dot(x, y)
        if np.any(1.0 + c < 1e-12):
            raise InjectivityError("antipodal sphere points have no unique geodesic")
        # rotation in the plane of x and y taking x to y
        A = y[..., :, None] * x[..., None, :] - x[..., :, None] * y[..., None, :]
        return np.eye(3) + A + (A @ A) / (1.0 + c)[..., None, None]
    # in 2D the transport is the rotation taking the unit tangent of the
    # connecting geodesic at x to its unit tangent at y; the angle below is
    # that of the two tangents with their common factor |y - x|^2 removed,
    # so it stays exact for nearly coincident points
    d0 = y[..., 0] - x[..., 0]
    d1 = y[..., 1] - x[..., 1]
    ang = np.arctan2(-2.0 * d0 * (x[..., 1] + y[..., 1]),
                     4.0 * x[..., 1] * y[..., 1] + d1 * d1 - d0 * d0)
    cos, sin = np.cos(ang), np.sin(ang)
    out = np.empty(lead + (2, 2))
    out[..., 0, 0] = cos
    out[..., 0, 1] = -sin
    out[..., 1, 0] = sin
    out[..., 1, 1] = cos
    return out


def parallel_transport(M: ManifoldSpec, x, y, v) -> np.ndarray:
    """Transport the tangent vector ``v`` at ``x`` to ``y`` (model components)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_tangent(M, x, v)
    P = transport_matrix(M, x, y)
    w = (P @ to_frame(M, x, v)[..., None])[..., 0]
    return project_tangent(M, y, from_frame(M, y, w))


# ---------------------------------------------------------------------------
# curvature

def curvature_op(M: ManifoldSpec, x, X, Y, Z) -> np.ndarray:
    """Riemann curvature ``R(X, Y)Z = K(<Y,Z> X - <X,Z> Y)``."""
    K = M.curvature
    yz = riemannian_inner(M, x, Y, Z)
    xz = riemannian_inner(M, x, X, Z)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return K * (yz[..., None] * X - xz[..., None] * Y)


def jacobi_coefficients(norm_tau, K: int, t=1.0):
    """Coefficients ``(a, b, e)`` of closed-form Jacobi fields along a geodesic.

    For a geodesic of speed ``norm_tau`` in a space of curvature ``K``, a
    Jacobi field transported back to the start reads
    ``J^T(0) + a J^N(0) + t (J')^T(0) + b (J')^N(0)``; ``e`` is the derivative
    of ``a`` divided by ``norm_tau``.
    """
    r = np.asarray(norm_tau, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 0):
        raise DomainError("norm_tau must be nonnegative")
    x = r * t
    if K == 0:
        a = np.ones_like(x)
        b = np.broadcast_to(t, x.shape).astype(float).copy()
        e = np.zeros_like(x)
        return a, b, e
    if K not in (-1, 1):
        raise DomainError("curvature must be -1, 0 or 1")
    small = r < SERIES_CUTOFF
    safe = np.where(small, 1.0, r)
    if K == 1:
        a = np.cos(x)
        b = np.where(small, t - x * x * t / 6.0, np.sin(x) / safe)
        e = -np.sin(x)
    else:
        a = np.cosh(x)
        b = np.where(small, t + x * x * t / 6.0, np.sinh(x) / safe)
        e = np.sinh(x)
    return a, b, e
