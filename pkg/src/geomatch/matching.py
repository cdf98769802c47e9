"""Reparameterization quotient: vertical/horizontal splitting of tangent
vectors, the horizontal part of a path, iterative optimal matching and a
dynamic-programming baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.linalg import solve_banded

from . import manifolds as mf
from .curves import (
    CurvePath,
    CurveTangent,
    DiscreteCurve,
    EdgeFrame,
    d_tau_frame,
    edge_frame_points,
    metric_frame,
    path_length,
)
from .errors import DomainError, MonotonicityError, SingularSystemError
from .geodesics import flat_geodesic, geodesic_length, geodesic_shoot

log = logging.getLogger(__name__)


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


# ---------------------------------------------------------------------------
# vertical / horizontal decomposition

@dataclass(frozen=True)
class VerticalDecomposition:
    """``w = w_ver + w_hor`` with ``w_ver = m v`` and ``m_0 = m_n = 0``."""

    m: np.ndarray
    w_ver: CurveTangent
    w_hor: CurveTangent
    residual: float


def _vertical_frame(ef: EdgeFrame, m: np.ndarray) -> np.ndarray:
    """Frame components of the vertical vector m v (v_n is unused, m_n = 0)."""
    out = np.zeros((ef.n + 1, ef.v.shape[1]))
    out[:-1] = m[:-1, None] * ef.v
    return out


def horizontality_defect(ef: EdgeFrame, wf: np.ndarray) -> np.ndarray:
    """Left-hand side of the discrete horizontality equation for k = 1..n-1.

    Zero exactly when the frame-component vector field ``wf`` is
    G-orthogonal to every vertical vector.
    """
    dt = d_tau_frame(ef, wf)
    v = ef.v
    r = ef.norm[1:] / ef.norm[:-1]
    binv = 1.0 / ef.b[:-1]
    vpar = np.einsum("kij,kj->ki", ef.bwd[:-1], v[1:])
    first = _dot(dt[1:], v[1:])
    second = binv * _dot(dt[:-1], vpar) + (0.25 - binv) * ef.lam * _dot(dt[:-1], v[:-1])
    return first - 4.0 * r * second


def _tridiagonal(ef: EdgeFrame):
    """Coefficients A_k, B_k, C_k of the m-recurrence for k = 1..n-1."""
    r = ef.norm[1:] / ef.norm[:-1]
    lam_prev = ef.lam
    b2 = ef.b[:-1] ** -2
    A = np.append(ef.lam[1:], 0.0)          # multiplies m_{k+1}
    B = -1.0 - 4.0 * r * (b2 + lam_prev**2 * (0.25 - b2))
    C = r * lam_prev                          # multiplies m_{k-1}
    return A, B, C


def _solve_m(ef: EdgeFrame, wf: np.ndarray) -> tuple[np.ndarray, float]:
    n = ef.n
    if n < 2:
        raise DomainError("the vertical decomposition needs n >= 2")
    A, B, C = _tridiagonal(ef)
    D = horizontality_defect(ef, wf)
    N = n - 1
    ab = np.zeros((3, N))
    ab[0, 1:] = A[:-1]
    ab[1] = B
    ab[2, :-1] = C[1:]
    try:
        inner = solve_banded((1, 1), ab, D)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise SingularSystemError(f"tridiagonal system is singular: {err}",
                                  diagonal_min=float(np.min(np.abs(B)))) from None
    if not np.all(np.isfinite(inner)):
        raise SingularSystemError("tridiagonal system is singular",
                                  diagonal_min=float(np.min(np.abs(B))))
    m = np.zeros(n + 1)
    m[1:-1] = inner
    res = B * inner - D
    res[:-1] += A[:-1] * inner[1:]
    res[1:] += C[1:] * inner[:-1]
    return m, float(np.max(np.abs(res)))


def decompose_frame(ef: EdgeFrame, wf: np.ndarray):
    """Frame-level decomposition: returns ``(m, w_ver, w_hor, residual)``."""
    m, res = _solve_m(ef, wf)
    ver = _vertical_frame(ef, m)
    return m, ver, wf - ver, res


def decompose_tangent(alpha: DiscreteCurve, w: CurveTangent) -> VerticalDecomposition:
    """Split ``w`` into its vertical part ``m v`` and its horizontal part."""
    ef = edge_frame_points(alpha.manifold, alpha.points)
    m, ver, hor, res = decompose_frame(ef, w.frame)
    return VerticalDecomposition(
        m, CurveTangent.from_frame(alpha, ver), CurveTangent.from_frame(alpha, hor), res)


def _path_velocities(p: CurvePath) -> np.ndarray:
    """Velocities at every sample, stored or by one-sided differences."""
    if p.velocities is not None:
        return p.velocities
    M = p.manifold
    vel = np.empty_like(p.points)
    vel[:-1] = p.m * mf.log_point(M, p.points[:-1], p.points[1:])
    vel[-1] = -p.m * mf.log_point(M, p.points[-1], p.points[-2])
    return vel


def verticality_ratio(p: CurvePath) -> np.ndarray:
    """``|vertical| / |horizontal|`` (G-norms) of the speed at every sample.

    A vanishing horizontal part gives ``inf`` (or 0 when the speed vanishes).
    """
    M = p.manifold
    vel = _path_velocities(p)
    out = np.empty(p.m + 1)
    for j in range(p.m + 1):
        P = p.points[j]
        ef = edge_frame_points(M, P)
        wf = mf.to_frame(M, P, vel[j])
        _, ver, hor, _ = decompose_frame(ef, wf)
        nv = math.sqrt(max(metric_frame(ef, ver, ver), 0.0))
        nh = math.sqrt(max(metric_frame(ef, hor, hor), 0.0))
        scale = math.sqrt(max(metric_frame(ef, wf, wf), 0.0))
        if nh <= 1e-14 * max(scale, 1e-300):
            out[j] = 0.0 if nv <= 1e-300 else np.inf
        else:
            out[j] = nv / nh
    return out


# ---------------------------------------------------------------------------
# interpolation of shapes

class ShapeSpline:
    """Dense interpolant of a discrete curve, queried by ``t`` in ``[0, 1]``.

    Point ``k`` is reproduced exactly at ``t = k/n``.  Internally a cubic
    spline in chord-length parameter (model coordinates) is composed with a
    monotone map from ``k/n`` to the chord parameter, which avoids the
    overshoot of index-parameterized splines on unevenly sampled curves.
    Sphere values are renormalized and half-plane heights kept positive.
    """

    def __init__(self, curve: DiscreteCurve):
        self.curve = curve
        self.manifold = curve.manifold
        P = np.asarray(curve.points, dtype=float)
        self.n = P.shape[0] - 1
        seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
        seg = np.maximum(seg, 1e-12 * max(seg.max(), 1e-300))
        chord = np.concatenate([[0.0], np.cumsum(seg)])
        chord /= chord[-1]
        grid = np.linspace(0.0, 1.0, self.n + 1)
        self._param = PchipInterpolator(grid, chord)
        if self.n >= 3:
            self._spline = CubicSpline(chord, P, axis=0)
        else:
            self._spline = PchipInterpolator(chord, P, axis=0)
        self._P = P

    def __call__(self, t) -> np.ndarray:
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        out = np.asarray(self._spline(self._param(t)), dtype=float)
        # exact reproduction at the nodes
        k = t * self.n
        node = np.abs(k - np.round(k)) < 1e-13
        if np.any(node):
            out[node] = self._P[np.round(k[node]).astype(int)]
        M = self.manifold
        if M.kind == "sphere":
            out = out / np.linalg.norm(out, axis=-1, keepdims=True)
        elif M.kind == "hyperbolic":
            out[..., 1] = np.maximum(out[..., 1], 1e-12)
        return out


# ---------------------------------------------------------------------------
# horizontal part of a path

RESAMPLE_MODES = ("inverse", "bracket")
_CFL = 0.45


def _upwind(phi, a, eps, n):
    """Advance phi_s = a n dphi over a time eps with upwind differences."""
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    nsub = max(1, int(math.ceil(eps * n * amax / _CFL)))
    h = eps / nsub
    for _ in range(nsub):
        fwd = np.zeros_like(phi)
        bwd = np.zeros_like(phi)
        fwd[:-1] = n * (phi[1:] - phi[:-1])
        bwd[1:] = n * (phi[1:] - phi[:-1])
        d = np.where(a >= 0, fwd, bwd)
        phi = phi + h * a * d
    return phi, nsub


def _repair(phi, n):
    """Clamp increments to at least 1e-9 per cell; returns clamped mass."""
    phi = phi.copy()
    phi[0], phi[-1] = 0.0, 1.0
    floor = 1e-9
    inc = np.diff(phi)
    clamped = float(np.sum(np.maximum(floor - inc, 0.0)))
    inc = np.maximum(inc, floor)
    phi = np.concatenate([[0.0], np.cumsum(inc)])
    phi /= phi[-1]
    return phi, clamped


def _inverse_nodes(phi, n, mode, upsample):
    """Parameters t_k with phi(t_k) = k/n."""
    grid = np.linspace(0.0, 1.0, n + 1)
    if mode == "inverse":
        inv = PchipInterpolator(phi, grid)
        t = inv(grid)
    else:
        N = upsample
        ell = np.linspace(0.0, 1.0, N + 1)
        psi = np.interp(ell, grid, phi)
        t = np.empty(n + 1)
        for k in range(n + 1):
            lo, hi = k / n, (k + 1) / n
            idx = np.flatnonzero((psi >= lo - 1e-15) & (psi < hi))
            if idx.size:
                t[k] = ell[idx[0]]
            else:
                t[k] = ell[int(np.argmin(np.abs(psi - lo)))]
    t[0], t[-1] = 0.0, 1.0
    return np.clip(t, 0.0, 1.0)


def horizontal_part_of_path(p: CurvePath, upsample: int | None = None, mode: str = "inverse",
                            end_shape=None, clamp_limit: float = 0.01) -> CurvePath:
    """Horizontal part of a path of discrete curves.

    The reparameterization ``phi(s)`` solves the transport equation
    ``phi_s = m / |c_t| * phi_t`` by upwind differences (with substeps
    keeping the scheme monotone), and the horizontal curves are
    ``x_k^hor(s) = c(s, phi(s)^{-1}(k/n))`` with ``c(s, .)`` a
    :class:`ShapeSpline` of ``p.curve(j)``.  At ``s = 1``, ``end_shape`` (a
    callable ``t -> points``) replaces the spline so the end curve stays on
    a prescribed shape.

    ``mode="inverse"`` inverts ``phi`` by monotone interpolation;
    ``mode="bracket"`` picks the first of ``upsample`` dense samples whose
    ``phi`` value falls in ``[k/n, (k+1)/n)``.  ``meta`` of the result holds
    the final ``phi``, the end parameters ``t_end`` and the clamped mass.
    """
    if mode not in RESAMPLE_MODES:
        raise DomainError(f"unknown resampling mode {mode!r}")
    if p.m < 1:
        raise DomainError("path needs at least one step")
    M, n, msteps = p.manifold, p.n, p.m
    if n < 2:
        raise DomainError("horizontal part needs n >= 2")
    upsample = upsample or 10 * n
    vel = _path_velocities(p)
    grid = np.linspace(0.0, 1.0, n + 1)
    phi = grid.copy()
    eps = 1.0 / msteps
    out = np.empty_like(p.points)
    out[0] = p.points[0]
    clamped_total = 0.0
    substeps = 0
    t = grid
    for j in range(msteps):
        P = p.points[j]
        ef = edge_frame_points(M, P)
        wf = mf.to_frame(M, P, vel[j])
        m, _ = _solve_m(ef, wf)
        a = np.zeros(n + 1)
        a[1:-1] = m[1:-1] / (n * ef.norm[1:])
        phi, ns = _upwind(phi, a, eps, n)
        substeps += ns
        if np.any(np.diff(phi) <= 0):
            phi, clamped = _repair(phi, n)
            clamped_total += clamped
            if clamped_total > clamp_limit:
                raise MonotonicityError(
                    "reparameterization lost monotonicity; use more path steps",
                    step=j, clamped=clamped_total)
        t = _inverse_nodes(phi, n, mode, upsample)
        if j + 1 == msteps and end_shape is not None:
            out[j + 1] = end_shape(t)
        else:
            out[j + 1] = ShapeSpline(p.curve(j + 1))(t)
    hor = CurvePath(M, out, kind="horizontal")
    hor.meta.update(phi=phi, t_end=t, clamped=clamped_total, substeps=substeps)
    return hor


# ---------------------------------------------------------------------------
# optimal matching

@dataclass
class MatchConfig:
    """Settings for optimal matching, the DP baseline and shape statistics."""

    steps: int = 100
    shoot_tol: float | None = None
    shoot_max_iter: int = 50
    horizontality_tol: float = 0.05
    max_iter: int = 30
    upsample: int | None = None
    resample: str = "inverse"
    geodesic: str = "auto"
    target_tol: float = 1e-6
    square: int = 7
    relaxed: bool = False

    def __post_init__(self):
        if self.steps < 1 or self.max_iter < 1 or self.shoot_max_iter < 1 or self.square < 1:
            raise DomainError("configuration values must be positive")
        if self.geodesic not in ("auto", "shoot", "closed"):
            raise DomainError(f"unknown geodesic method {self.geodesic!r}")


@dataclass
class Matching:
    """Result of a matching: ``phi`` samples on ``k/n`` (target parameter),
    the reparameterized target, iteration count and geodesic lengths."""

    phi: np.ndarray
    matched: DiscreteCurve
    iterations: int
    length_history: list = field(default_factory=list)
    horizontal_lengths: list = field(default_factory=list)
    ratio_history: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""


def connecting_geodesic(a0: DiscreteCurve, a1: DiscreteCurve, cfg: MatchConfig | None = None,
                        w0=None) -> CurvePath:
    """Geodesic between two curves per the configured method."""
    cfg = cfg or MatchConfig()
    if a0.manifold.flat and cfg.geodesic in ("auto", "closed"):
        return flat_geodesic(a0, a1, cfg.steps)
    if cfg.geodesic == "closed":
        raise DomainError("closed-form geodesics exist only for Euclidean curves")
    return geodesic_shoot(a0, a1, cfg.steps, cfg.shoot_tol, cfg.shoot_max_iter, w0=w0)


def _compose(theta: np.ndarray, t: np.ndarray) -> np.ndarray:
    """theta(t) for the monotone interpolant of theta on the grid k/n."""
    n = theta.size - 1
    grid = np.linspace(0.0, 1.0, n + 1)
    out = PchipInterpolator(grid, theta)(t)
    out = np.maximum.accumulate(np.clip(out, 0.0, 1.0))
    out[0], out[-1] = 0.0, 1.0
    return out


def optimal_match(a0: DiscreteCurve, a1: DiscreteCurve, cfg: MatchConfig | None = None,
                  theta0: np.ndarray | None = None,
                  spline: "ShapeSpline | None" = None) -> tuple[CurvePath, Matching]:
    """Iterative optimal matching of ``a1`` onto ``a0``.

    Alternates between the geodesic to the current target and the horizontal
    part of that geodesic, whose end curve (kept on the spline shape of
    ``a1``) becomes the next target.  Stops once the verticality ratio of the
    geodesic is below ``cfg.horizontality_tol`` everywhere, the target moves
    less than ``cfg.target_tol``, or the budget is spent.  An iterate whose
    geodesic is longer than the previous one is rejected and the previous
    result returned.

    ``theta0`` warm-starts the reparameterization (samples on ``k/n`` of the
    parameter of ``spline``, which defaults to the spline of ``a1``).
    """
    cfg = cfg or MatchConfig()
    if a0.manifold != a1.manifold or a0.points.shape != a1.points.shape:
        raise DomainError("curves are not compatible")
    n = a0.n
    spline = spline or ShapeSpline(a1)
    if theta0 is None:
        theta = np.linspace(0.0, 1.0, n + 1)
        target = a1
    else:
        theta = np.asarray(theta0, dtype=float)
        target = DiscreteCurve(a0.manifold, spline(theta), cfg.relaxed)
    lengths, hlengths, ratios = [], [], []
    best = None
    reason = "budget"
    converged = False
    move = np.inf
    it = 0
    while True:
        it += 1
        geo = connecting_geodesic(a0, target, cfg)
        L = geodesic_length(geo)
        if best is not None and L > lengths[-1] + 1e-8:
            log.info("matching iterate %d lengthened the geodesic (%.3e); stopping", it, L - lengths[-1])
            reason = "length increase"
            it -= 1
            break
        lengths.append(L)
        ratio = verticality_ratio(geo) if n >= 2 else np.zeros(geo.m + 1)
        finite = ratio[np.isfinite(ratio)]
        rmax = float(np.max(ratio)) if ratio.size else 0.0
        ratios.append(rmax)
        best = (geo, theta.copy(), target)
        log.debug("matching iterate %d: length %.10g, max ratio %.3e", it, L, rmax)
        if L <= 1e-14 or (finite.size == ratio.size and rmax < cfg.horizontality_tol):
            reason, converged = "horizontal", True
            break
        if move < cfg.target_tol:
            reason, converged = "target stalled", True
            break
        if it >= cfg.max_iter:
            break
        th = theta

        def end_shape(t, th=th):
            return spline(_compose(th, t))

        hor = horizontal_part_of_path(geo, cfg.upsample, cfg.resample, end_shape=end_shape)
        hlengths.append(path_length(hor))
        theta = _compose(theta, hor.meta["t_end"])
        new_target = DiscreteCurve(a0.manifold, hor.points[-1], cfg.relaxed)
        move = float(np.max(mf.distance(a0.manifold, new_target.points, target.points)))
        target = new_target
    geo, theta, target = best
    match = Matching(theta, target, it, lengths, hlengths, ratios, converged, reason)
    geo.meta.update(matching_iterations=it, reason=reason)
    return geo, match


# ---------------------------------------------------------------------------
# dynamic programming baseline

@dataclass
class DpGrid:
    """Cost table and back-pointers of the DP search on the index grid."""

    size: int
    square: int
    cost: np.ndarray
    back: np.ndarray
    path: list


def _srv_cells(curve: DiscreteCurve):
    ef = edge_frame_points(curve.manifold, curve.points)
    return ef


def _segment_cost(q0, q1, i0, i1, j0, j1, n, transport=None):
    """L2 cost between piece [i0, i1] of curve 0 and piece [j0, j1] of curve 1
    mapped linearly onto it; SRVs are piecewise constant on cells of width
    1/n, and the mapped piece gets the factor sqrt(slope)."""
    slope = (j1 - j0) / (i1 - i0)
    rs = math.sqrt(slope)
    # breakpoints in the parameter of curve 0 (units of cells)
    bps = set(range(i0, i1 + 1))
    for j in range(j0, j1 + 1):
        bps.add(i0 + (j - j0) / slope)
    bps = sorted(b for b in bps if i0 <= b <= i1)
    total = 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        if b - a <= 1e-15:
            continue
        mid = 0.5 * (a + b)
        ci = min(int(math.floor(mid)), n - 1)
        cj = min(int(math.floor(j0 + (mid - i0) * slope)), n - 1)
        u = rs * q1[cj]
        if transport is not None:
            u = transport[ci, cj] @ u
        d = q0[ci] - u
        total += (b - a) / n * float(d @ d)
    return total


def dp_match(a0: DiscreteCurve, a1: DiscreteCurve, square: int = 7,
             cfg: MatchConfig | None = None) -> tuple[CurvePath, Matching]:
    """Dynamic-programming matching on the grid of sample indices.

    Grid nodes are pairs ``(i, j)`` of indices of ``a0`` and ``a1``; a move
    goes from ``(i, j)`` to ``(i', j')`` with ``1 <= i'-i, j'-j <= square``
    and costs the squared SRV distance between the two pieces (Euclidean:
    exact for piecewise-constant SRVs; curved: SRVs of ``a1`` transported to
    the matching points of ``a0``).  The target is resampled along the
    optimal path on its spline shape and joined to ``a0`` by a geodesic.
    """
    cfg = cfg or MatchConfig()
    if a0.manifold != a1.manifold or a0.points.shape != a1.points.shape:
        raise DomainError("curves are not compatible")
    M = a0.manifold
    n = a0.n
    e0, e1 = _srv_cells(a0), _srv_cells(a1)
    q0, q1 = e0.q, e1.q
    transport = None
    if not M.flat:
        # frame transports from the cells of a1 to the cells of a0
        transport = mf.transport_matrix(M, a1.points[:-1][None, :, :], a0.points[:-1][:, None, :])
        # q is in frame components at each point, transport acts on frames
    INF = np.inf
    cost = np.full((n + 1, n + 1), INF)
    back = np.full((n + 1, n + 1, 2), -1, dtype=int)
    cost[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            best, arg = INF, None
            for pi in range(max(0, i - square), i):
                for pj in range(max(0, j - square), j):
                    c0 = cost[pi, pj]
                    if c0 == INF:
                        continue
                    c = c0 + _segment_cost(q0, q1, pi, i, pj, j, n, transport)
                    if c < best:
                        best, arg = c, (pi, pj)
            if arg is not None:
                cost[i, j] = best
                back[i, j] = arg
    path = [(n, n)]
    while path[-1] != (0, 0):
        i, j = path[-1]
        path.append(tuple(int(x) for x in back[i, j]))
    path.reverse()
    gi = np.array([p[0] for p in path], dtype=float) / n
    gj = np.array([p[1] for p in path], dtype=float) / n
    if np.any(np.diff(gi) <= 0) or np.any(np.diff(gj) <= 0):
        raise MonotonicityError("DP path is not monotone")
    grid = np.linspace(0.0, 1.0, n + 1)
    theta = np.interp(grid, gi, gj)
    theta[0], theta[-1] = 0.0, 1.0
    matched = DiscreteCurve(M, ShapeSpline(a1)(theta), cfg.relaxed)
    geo = connecting_geodesic(a0, matched, cfg)
    L = geodesic_length(geo)
    dp = DpGrid(n + 1, square, cost, back, path)
    geo.meta.update(dp=dp)
    return geo, Matching(theta, matched, 1, [L], [], [], True, "dp")
