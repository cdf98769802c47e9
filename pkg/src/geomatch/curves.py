"""Discrete curves, their SRV representation, the difference operator and metric.

A discrete curve is an ``(n+1)``-tuple of points of the base manifold.  Its
square-root-velocity (SRV) representation is the start point ``x_0`` with the
vectors ``q_k = sqrt(n) tau_k / sqrt(|tau_k|)`` built from the edge logarithms
``tau_k = log_{x_k} x_{k+1}``.  The metric on tangent vectors ``w`` is

    G(w, w) = |w_0|^2 + sum_k (|(D w)_k^N|^2 + |(D w)_k^T|^2 / 4) / |tau_k|

where ``D`` is the covariant difference operator along the piecewise geodesic
curve and ``T``/``N`` denote the components along / across the edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import manifolds as mf
from .errors import ContractError, DegenerateEdgeError, DomainError
from .manifolds import ManifoldSpec


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _tan(w, v):
    """Component of w along the unit vectors v."""
    return _dot(w, v)[..., None] * v


def _mv(P, w):
    """Apply per-edge matrices P (k, D, D) to vectors w (..., k, D)."""
    return np.einsum("kij,...kj->...ki", P, w)


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """An ordered list of ``n+1`` manifold points (``n >= 1``).

    Consecutive points must be distinct unless ``relaxed`` is set, which is
    only allowed for Euclidean curves (a vanishing edge then gets ``q_k = 0``).
    """

    manifold: ManifoldSpec
    points: np.ndarray
    relaxed: bool = False

    def __post_init__(self):
        M = self.manifold
        pts = mf.check_point(M, self.points)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise DomainError("a discrete curve needs at least two points")
        if self.relaxed and not M.flat:
            raise DomainError("relaxed edges are only supported for Euclidean curves")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.relaxed:
            d = mf.distance(M, pts[:-1], pts[1:])
            bad = np.flatnonzero(d <= 1e-14)
            if bad.size:
                raise DegenerateEdgeError(
                    f"consecutive points {int(bad[0])} and {int(bad[0]) + 1} coincide",
                    edges=bad.tolist(),
                )

    @property
    def n(self) -> int:
        return self.points.shape[0] - 1

    def __len__(self):
        return self.points.shape[0]

    def with_points(self, points) -> "DiscreteCurve":
        return DiscreteCurve(self.manifold, points, self.relaxed)


@dataclass(frozen=True, eq=False)
class CurveTangent:
    """One tangent vector per curve point, in model coordinates."""

    base: DiscreteCurve
    vecs: np.ndarray

    def __post_init__(self):
        v = np.array(self.vecs, dtype=float)
        if v.shape != self.base.points.shape:
            raise DomainError(f"tangent shape {v.shape} does not match curve {self.base.points.shape}")
        v = mf.project_tangent(self.base.manifold, self.base.points, v)
        v.setflags(write=False)
        object.__setattr__(self, "vecs", v)

    @classmethod
    def zeros(cls, base: DiscreteCurve) -> "CurveTangent":
        return cls(base, np.zeros_like(base.points))

    @classmethod
    def from_frame(cls, base: DiscreteCurve, w) -> "CurveTangent":
        return cls(base, mf.from_frame(base.manifold, base.points, w))

    @property
    def frame(self) -> np.ndarray:
        return mf.to_frame(self.base.manifold, self.base.points, self.vecs)

    def _same(self, other):
        if other.base is not self.base and not np.array_equal(other.base.points, self.base.points):
            raise DomainError("tangent vectors live on different curves")

    def __add__(self, other: "CurveTangent") -> "CurveTangent":
        self._same(other)
        return CurveTangent(self.base, self.vecs + other.vecs)

    def __sub__(self, other: "CurveTangent") -> "CurveTangent":
        self._same(other)
        return CurveTangent(self.base, self.vecs - other.vecs)

    def __mul__(self, c: float) -> "CurveTangent":
        return CurveTangent(self.base, self.vecs * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class EdgeFrame:
    """Per-edge quantities of a discrete curve, in frame components.

    ``tau[k]`` is the logarithm of ``x_{k+1}`` at ``x_k``, ``v[k]`` its unit
    direction, ``q[k]`` the SRV vector, ``a[k]``, ``b[k]`` the Jacobi
    coefficients of the edge and ``lam[k] = <v_{k+1} transported to x_k, v_k>``
    (defined for ``k < n-1``).  ``fwd[k]`` / ``bwd[k]`` transport frame
    components from ``x_k`` to ``x_{k+1}`` and back.
    """

    manifold: ManifoldSpec
    n: int
    tau: np.ndarray
    norm: np.ndarray
    v: np.ndarray
    q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    e: np.ndarray
    lam: np.ndarray
    fwd: np.ndarray
    bwd: np.ndarray

    @property
    def qnorm(self) -> np.ndarray:
        return np.sqrt(self.n * self.norm)


def edge_frame_points(M: ManifoldSpec, P: np.ndarray, relaxed: bool = False) -> EdgeFrame:
    """Edge frame of the curve with points ``P`` (no validation of ``P``)."""
    n = P.shape[0] - 1
    tau = mf.to_frame(M, P[:-1], mf.log_point(M, P[:-1], P[1:]))
    norm = np.sqrt(_dot(tau, tau))
    zero = norm <= 1e-300
    if np.any(zero) and not relaxed:
        k = int(np.flatnonzero(zero)[0])
        raise DegenerateEdgeError(f"edge {k} has zero length", edge=k)
    safe = np.where(zero, 1.0, norm)
    v = np.where(zero[:, None], 0.0, tau / safe[:, None])
    q = np.sqrt(n) * tau / np.sqrt(safe)[:, None]
    a, b, e = mf.jacobi_coefficients(norm, M.curvature, 1.0)
    fwd = mf.transport_matrix(M, P[:-1], P[1:])
    bwd = np.swapaxes(fwd, -1, -2)
    if n > 1:
        vpar = np.einsum("kij,kj->ki", bwd[:-1], v[1:])
        lam = _dot(vpar, v[:-1])
    else:
        lam = np.zeros(0)
    return EdgeFrame(M, n, tau, norm, v, q, a, b, e, lam, fwd, bwd)


def edge_frame(curve: DiscreteCurve) -> EdgeFrame:
    """Edge frame (tau_k, |tau_k|, v_k, q_k, a_k, b_k, transports) of a curve."""
    return edge_frame_points(curve.manifold, curve.points, curve.relaxed)


# ---------------------------------------------------------------------------
# D_tau and the metric, on frame components

def d_tau_frame(ef: EdgeFrame, w: np.ndarray) -> np.ndarray:
    """Covariant difference of frame components ``w`` of shape (..., n+1, D).

    Returns the ``n`` edge values, shape (..., n, D).
    """
    wpar = _mv(ef.bwd, w[..., 1:, :])
    wk = w[..., :-1, :]
    v = ef.v
    diff = wpar - wk
    tan = _tan(diff, v)
    normal = (wpar - _tan(wpar, v)) - ef.a[:, None] * (wk - _tan(wk, v))
    return tan + normal / ef.b[:, None]


def metric_frame(ef: EdgeFrame, w: np.ndarray, z: np.ndarray) -> np.ndarray:
    if np.any(ef.norm <= 0):
        raise DegenerateEdgeError("metric undefined on a curve with a vanishing edge")
    dw = d_tau_frame(ef, w)
    dz = dw if z is w else d_tau_frame(ef, z)
    v = ef.v
    wt, zt = _dot(dw, v), _dot(dz, v)
    nn = _dot(dw, dz) - wt * zt
    edge = (nn + 0.25 * wt * zt) / ef.norm
    return _dot(w[..., 0, :], z[..., 0, :]) + edge.sum(axis=-1)


def d_tau(curve: DiscreteCurve, w: CurveTangent) -> CurveTangent:
    """Covariant difference ``(D w)_k``; the unused last slot is zero."""
    _check_base(curve, w)
    ef = edge_frame(curve)
    out = np.zeros_like(curve.points)
    out[:-1] = d_tau_frame(ef, w.frame)
    return CurveTangent.from_frame(curve, out)


def metric_gn(curve: DiscreteCurve, w: CurveTangent, z: CurveTangent | None = None) -> float:
    """The discrete elastic metric ``G(w, z)`` at ``curve``."""
    _check_base(curve, w)
    if z is None:
        z = w
    _check_base(curve, z)
    ef = edge_frame(curve)
    wf = w.frame
    zf = wf if z is w else z.frame
    return float(metric_frame(ef, wf, zf))


def norm_gn(curve: DiscreteCurve, w: CurveTangent) -> float:
    return float(np.sqrt(max(metric_gn(curve, w), 0.0)))


def srv_velocity_frame(ef: EdgeFrame, w: np.ndarray) -> np.ndarray:
    """Derivative of the SRV vectors ``q_k`` induced by the tangent ``w``."""
    dt = d_tau_frame(ef, w)
    return np.sqrt(ef.n / ef.norm)[:, None] * (dt - 0.5 * _tan(dt, ef.v))


def _check_base(curve, w):
    if w.base is not curve and not np.array_equal(w.base.points, curve.points):
        raise DomainError("tangent vector is not based at this curve")


# ---------------------------------------------------------------------------
# SRV representation

@dataclass(frozen=True, eq=False)
class SrvRep:
    """Start point and SRV vectors ``q_k`` (model components at ``x_k``)."""

    manifold: ManifoldSpec
    x0: np.ndarray
    qs: np.ndarray

    @property
    def n(self) -> int:
        return self.qs.shape[0]


def srv(curve: DiscreteCurve) -> SrvRep:
    ef = edge_frame(curve)
    qs = mf.from_frame(curve.manifold, curve.points[:-1], ef.q)
    return SrvRep(curve.manifold, curve.points[0].copy(), qs)


def srv_inverse(rep: SrvRep, relaxed: bool = False) -> DiscreteCurve:
    """Rebuild the curve: ``x_{k+1} = exp_{x_k}(|q_k| q_k / n)``."""
    M = rep.manifold
    n = rep.n
    pts = np.empty((n + 1, M.coord_dim))
    pts[0] = mf.check_point(M, rep.x0)
    for k in range(n):
        qf = mf.to_frame(M, pts[k], rep.qs[k])
        qn = np.sqrt(_dot(qf, qf))
        tau = mf.from_frame(M, pts[k], qn * qf / n)
        pts[k + 1] = mf.exp_point(M, pts[k], mf.project_tangent(M, pts[k], tau))
    return DiscreteCurve(M, pts, relaxed)


def srv_inverse_frame(M: ManifoldSpec, x0: np.ndarray, qf: np.ndarray) -> np.ndarray:
    """Points of the curve with start ``x0`` and SRV frame components ``qf``."""
    n = qf.shape[0]
    pts = np.empty((n + 1, M.coord_dim))
    pts[0] = x0
    qn = np.sqrt(_dot(qf, qf))
    tau = qn[:, None] * qf / n
    if M.kind == "euclidean":
        pts[1:] = x0 + np.cumsum(tau, axis=0)
        return pts
    for k in range(n):
        pts[k + 1] = mf.exp_point(M, pts[k], mf.from_frame(M, pts[k], tau[k]))
    return pts


def discretize(sampler: Callable[[float], np.ndarray], n: int, manifold: ManifoldSpec,
               relaxed: bool = False) -> DiscreteCurve:
    """Sample ``sampler`` at ``t = k/n`` for ``k = 0..n``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    pts = np.array([np.asarray(sampler(k / n), dtype=float) for k in range(n + 1)])
    return DiscreteCurve(manifold, pts, relaxed)


# ---------------------------------------------------------------------------
# paths of curves

KINDS = ("geodesic", "horizontal", "raw")


@dataclass(eq=False)
class CurvePath:
    """Curves sampled at ``s_j = j/m``, optionally with velocities.

    ``points`` has shape ``(m+1, n+1, D)``; ``velocities`` (model components)
    has the same shape or is ``None``.  ``meta`` carries solver diagnostics.
    """

    manifold: ManifoldSpec
    points: np.ndarray
    velocities: np.ndarray | None = None
    kind: str = "raw"
    meta: dict = field(default_factory=dict)
    cache: object = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 3 or self.points.shape[0] < 2:
            raise DomainError("a path needs at least two sampled curves")
        if self.kind not in KINDS:
            raise DomainError(f"unknown path kind {self.kind!r}")
        if self.velocities is not None:
            self.velocities = np.asarray(self.velocities, dtype=float)
            if self.velocities.shape != self.points.shape:
                raise DomainError("velocity array does not match the path")

    @property
    def m(self) -> int:
        return self.points.shape[0] - 1

    @property
    def n(self) -> int:
        return self.points.shape[1] - 1

    def curve(self, j: int) -> DiscreteCurve:
        return DiscreteCurve(self.manifold, self.points[j])

    @property
    def curves(self) -> list[DiscreteCurve]:
        return [self.curve(j) for j in range(self.m + 1)]

    @property
    def start(self) -> DiscreteCurve:
        return self.curve(0)

    @property
    def end(self) -> DiscreteCurve:
        return self.curve(self.m)

    def velocity(self, j: int) -> CurveTangent:
        if self.velocities is None:
            raise ContractError("path carries no velocities")
        return CurveTangent(self.curve(j), self.velocities[j])

    @property
    def length(self) -> float:
        return path_length(self)


def _chord_samples(path: CurvePath):
    """Midpoint curves and symmetric-difference velocities of each step."""
    M = path.manifold
    A = path.points[:-1]
    B = path.points[1:]
    half = 0.5 * mf.log_point(M, A, B)
    mid = mf.exp_point(M, A, half)
    vel = path.m * (mf.log_point(M, mid, B) - mf.log_point(M, mid, A))
    return mid, mf.project_tangent(M, mid, vel)


def _speeds_sq(path: CurvePath, use_velocities: bool) -> tuple[np.ndarray, bool]:
    M = path.manifold
    if use_velocities and path.velocities is not None:
        pts, vel = path.points, path.velocities
        mid = False
    else:
        pts, vel = _chord_samples(path)
        mid = True
    out = np.empty(pts.shape[0])
    for j in range(pts.shape[0]):
        ef = edge_frame_points(M, pts[j])
        w = mf.to_frame(M, pts[j], vel[j])
        out[j] = metric_frame(ef, w, w)
    return out, mid


def path_energy(path: CurvePath, use_velocities: bool = False) -> float:
    """Energy ``1/2 int G(a', a') ds``.

    By default the midpoint rule with chord velocities is used; with
    ``use_velocities`` the stored velocities are integrated by the trapezoid
    rule.
    """
    g, mid = _speeds_sq(path, use_velocities)
    if mid:
        return 0.5 * float(np.mean(g))
    return 0.5 * float(np.trapezoid(g, dx=1.0 / path.m))


def path_length(path: CurvePath, use_velocities: bool = False) -> float:
    """Length ``int sqrt(G(a', a')) ds`` with the same quadrature as the energy."""
    g, mid = _speeds_sq(path, use_velocities)
    s = np.sqrt(np.maximum(g, 0.0))
    if mid:
        return float(np.mean(s))
    return float(np.trapezoid(s, dx=1.0 / path.m))


def path_speeds(path: CurvePath) -> np.ndarray:
    """``G``-norm of the stored velocity at every sample."""
    g, _ = _speeds_sq(path, True)
    if path.velocities is None:
        raise ContractError("path carries no velocities")
    return np.sqrt(np.maximum(g, 0.0))


def pointwise_log(a: DiscreteCurve, b: DiscreteCurve) -> CurveTangent:
    """Tangent at ``a`` pointing to ``b`` point by point (the L2 logarithm)."""
    if a.manifold != b.manifold or a.points.shape != b.points.shape:
        raise DomainError("curves are not compatible")
    return CurveTangent(a, mf.log_point(a.manifold, a.points, b.points))


def l2_norm(w: CurveTangent) -> float:
    """Root mean square of the pointwise Riemannian norms."""
    f = w.frame
    return float(np.sqrt(np.mean(_dot(f, f))))


def max_pointwise_distance(a: DiscreteCurve, b: DiscreteCurve) -> float:
    return float(np.max(mf.distance(a.manifold, a.points, b.points)))
