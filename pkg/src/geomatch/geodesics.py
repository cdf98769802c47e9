"""Geodesics of the discrete elastic metric: equations, exponential map,
Jacobi fields and geodesic shooting.

Everything here works on frame components (see :mod:`geomatch.manifolds`),
so inner products are dot products and transports are orthogonal matrices.
Per-edge arrays have a leading edge axis of length ``n``; Jacobi fields may
carry an extra leading batch axis so that the images of a whole basis are
propagated at once.

Two time-stepping schemes are available for both geodesics and Jacobi fields.
``"srv"`` (default) advances the start point and the SRV vectors with an
explicit first-order step and rebuilds the curve from them; it is exact for
Euclidean curves, whose geodesics are straight lines in SRV coordinates.
``"points"`` advances every curve point and its velocity, using the
acceleration recursion for all points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import manifolds as mf
from .curves import (
    CurvePath,
    CurveTangent,
    DiscreteCurve,
    EdgeFrame,
    d_tau_frame,
    edge_frame_points,
    l2_norm,
    metric_frame,
    pointwise_log,
    srv_inverse_frame,
)
from .errors import ContractError, DegenerateEdgeError, DomainError, InjectivityError, ShootingDivergenceError, SingularSystemError
from .manifolds import ManifoldSpec

SCHEMES = ("srv", "points")
JACOBI_SCHEMES = ("srv", "srv-euler", "points")


def _dot(a, b):
    # explicit sums beat einsum for the 2- and 3-vectors used here
    out = a[..., 0] * b[..., 0]
    for i in range(1, a.shape[-1]):
        out = out + a[..., i] * b[..., i]
    return out


def _s(x):
    return np.asarray(x)[..., None]


def _tan(w, v):
    return _s(_dot(w, v)) * v


def _mv(P, w):
    """Apply per-edge matrices P (k, D, D) to vectors w (..., k, D)."""
    D = P.shape[-1]
    return np.stack([_dot(P[:, i, :], w) for i in range(D)], axis=-1)


def _curv(K, X, Y, Z):
    """R(X, Y)Z for constant curvature K."""
    if K == 0:
        return np.zeros(np.broadcast(X, Y, Z).shape)
    return K * (_s(_dot(Y, Z)) * X - _s(_dot(X, Z)) * Y)


def _pi(w, v, dv):
    # derivative of the tangential projection: <w, v'> v + <w, v> v'
    return _s(_dot(w, dv)) * v + _s(_dot(w, v)) * dv


# ---------------------------------------------------------------------------
# coefficient functions of |tau|

_SERIES = 0.1


def edge_coefficients(norm: np.ndarray, K: int) -> dict:
    """a, b, e and the |tau|-derivatives used by the chain rules.

    ``c = K (1 - a) / |tau|^2`` is the normal weight in ``Y_k`` (for curved
    spaces it equals the integral of ``b(t)`` over ``[0, 1]``; it is zero in
    the flat case, where ``Y_k`` only ever appears multiplied by ``K``).
    ``db``, ``d2b``, ``dc`` are derivatives with respect to ``|tau|`` and
    ``de = -K a``.
    """
    x = np.asarray(norm, dtype=float)
    a, b, e = mf.jacobi_coefficients(x, K, 1.0)
    if K == 0:
        z = np.zeros_like(x)
        return dict(a=a, b=b, e=e, c=z, db=z, d2b=z, dc=z, de=z)
    small = x < _SERIES
    xs = np.where(small, 1.0, x)
    c = np.where(small, 0.0, K * (1.0 - a) / xs**2)
    db = (a - b) / xs
    d2b = (e - 2.0 * db) / xs
    dc = (b - 2.0 * c) / xs
    # series in x for the small edges: terms (-K)^j x^(2j) / (2j+k)!
    cs = np.zeros_like(x)
    dbs = np.zeros_like(x)
    d2bs = np.zeros_like(x)
    dcs = np.zeros_like(x)
    fact = [1.0]
    for i in range(1, 20):
        fact.append(fact[-1] * i)
    for j in range(0, 7):
        sgn = (-K) ** j
        cs += sgn * x ** (2 * j) / fact[2 * j + 2]
        if j >= 1:
            dbs += sgn * 2 * j / fact[2 * j + 1] * x ** (2 * j - 1)
            d2bs += sgn * 2 * j * (2 * j - 1) / fact[2 * j + 1] * x ** (2 * j - 2)
            dcs += sgn * 2 * j / fact[2 * j + 2] * x ** (2 * j - 1)
    return dict(
        a=a, b=b, e=e,
        c=np.where(small, cs, c),
        db=np.where(small, dbs, db),
        d2b=np.where(small, d2bs, d2b),
        dc=np.where(small, dcs, dc),
        de=-K * a,
    )


# ---------------------------------------------------------------------------
# edge maps

def _fmat(a, v):
    """Matrices of f_k(w) = w^T + a_k w^N, shape (n, D, D)."""
    D = v.shape[-1]
    return a[:, None, None] * np.eye(D) + (1.0 - a)[:, None, None] * (v[:, :, None] * v[:, None, :])


@dataclass
class EdgeMaps:
    """The edge maps f_k, g_k of a curve and their derivatives along a path.

    First derivatives are stored through the rates ``dnorm`` (of |tau_k|),
    ``dv`` (of v_k) and ``dqn`` (of |q_k|); second derivatives, when
    available, through ``d2norm``, ``d2v`` and ``d2qn``.  ``Y`` is the
    correction vector entering the derivative of the edge transport.
    """

    ef: EdgeFrame
    co: dict
    dnorm: np.ndarray | None = None
    dv: np.ndarray | None = None
    dqn: np.ndarray | None = None
    Y: np.ndarray | None = None
    d2norm: np.ndarray | None = None
    d2v: np.ndarray | None = None
    d2qn: np.ndarray | None = None

    @property
    def K(self):
        return self.ef.manifold.curvature

    # -- the maps themselves (all edges at once, w of shape (..., n, D))
    def f(self, w):
        v, a = self.ef.v, self.co["a"]
        t = _tan(w, v)
        return t + _s(a) * (w - t)

    def g(self, w):
        v, b = self.ef.v, self.co["b"]
        t = _tan(w, v)
        return _s(self.ef.qnorm) * (2.0 * t + _s(b) * (w - t))

    def ginv(self, w):
        v, b = self.ef.v, self.co["b"]
        t = _tan(w, v)
        return (w / _s(b) + (0.5 - 1.0 / _s(b)) * t) / _s(self.ef.qnorm)

    def back(self, w):
        """Transport edge-end vectors w_{k+1} back to x_k."""
        return _mv(self.ef.bwd, w)

    def f_minus(self, w):
        return self.f(self.back(w))

    def g_minus(self, w):
        return self.g(self.back(w))

    # -- derivative scalars
    @property
    def da(self):
        return self.co["e"] * self.dnorm

    @property
    def dbs(self):
        return self.co["db"] * self.dnorm

    @property
    def rho(self):
        return self.dqn / self.ef.qnorm

    # -- first derivatives
    def df(self, w):
        v = self.ef.v
        return _s(self.da) * (w - _tan(w, v)) + _s(1.0 - self.co["a"]) * _pi(w, v, self.dv)

    def dg(self, w):
        v, b, nq = self.ef.v, self.co["b"], self.ef.qnorm
        return (_s(self.rho) * self.g(w) + _s(nq * self.dbs) * (w - _tan(w, v))
                + _s(nq * (2.0 - b)) * _pi(w, v, self.dv))

    def dginv(self, w):
        v, b, nq = self.ef.v, self.co["b"], self.ef.qnorm
        dbeta = -self.dbs / b**2
        return (-_s(self.rho) * self.ginv(w)
                + (_s(dbeta) * (w - _tan(w, v)) + _s(0.5 - 1.0 / b) * _pi(w, v, self.dv)) / _s(nq))

    def transport_rate(self, u):
        """R(Y_k, tau_k) u: rate of change of the back-transport."""
        return _curv(self.K, self.Y, self.ef.tau, u)

    def df_minus(self, w):
        u = self.back(w)
        return self.df(u) + self.f(self.transport_rate(u))

    def dg_minus(self, w):
        u = self.back(w)
        return self.dg(u) + self.g(self.transport_rate(u))

    # -- second derivatives
    @property
    def d2a(self):
        return self.co["de"] * self.dnorm**2 + self.co["e"] * self.d2norm

    @property
    def d2bs(self):
        return self.co["d2b"] * self.dnorm**2 + self.co["db"] * self.d2norm

    def _pi2(self, w):
        v, dv, d2v = self.ef.v, self.dv, self.d2v
        return (_s(_dot(w, d2v)) * v + 2.0 * _s(_dot(w, dv)) * dv + _s(_dot(w, v)) * d2v)

    def d2f(self, w):
        v = self.ef.v
        return (_s(self.d2a) * (w - _tan(w, v)) - 2.0 * _s(self.da) * _pi(w, v, self.dv)
                + _s(1.0 - self.co["a"]) * self._pi2(w))

    def d2g(self, w):
        v, b, nq = self.ef.v, self.co["b"], self.ef.qnorm
        dq, d2q = self.dqn, self.d2qn
        drho = d2q / nq - (dq / nq) ** 2
        return (_s(drho) * self.g(w) + _s(self.rho) * self.dg(w)
                + _s(dq * self.dbs + nq * self.d2bs) * (w - _tan(w, v))
                + _s(nq * (2.0 - b)) * self._pi2(w)
                + _s(dq * (2.0 - b) - 2.0 * nq * self.dbs) * _pi(w, v, self.dv))


def build_edge_maps(state: "GeodesicState") -> EdgeMaps:
    """Edge maps of a geodesic state, including second derivatives."""
    return state.maps(second=True)


# ---------------------------------------------------------------------------
# geodesic state

@dataclass
class GeodesicState:
    """A curve with its velocity and the derived quantities along a geodesic.

    ``xd`` holds the point velocities x_k', ``dq`` the rates of the SRV
    vectors, ``R`` the curvature terms R_k = R(q_k, dq_k) x_k', ``S`` their
    suffix sums under the f^(-) chains, ``ddq`` the SRV accelerations and
    ``xdd`` the point accelerations.  All in frame components.
    """

    manifold: ManifoldSpec
    P: np.ndarray
    ef: EdgeFrame
    co: dict
    xd: np.ndarray
    dq: np.ndarray
    dtau: np.ndarray
    dv: np.ndarray
    dnorm: np.ndarray
    dqn: np.ndarray
    Y: np.ndarray
    R: np.ndarray
    S: np.ndarray
    ddq: np.ndarray
    xdd: np.ndarray
    A: np.ndarray       # fwd_k o f_k
    Fm: np.ndarray      # f_k o bwd_k
    _second: EdgeMaps | None = field(default=None, repr=False)

    @property
    def n(self):
        return self.ef.n

    @property
    def K(self):
        return self.manifold.curvature

    def maps(self, second: bool = False) -> EdgeMaps:
        base = EdgeMaps(self.ef, self.co, self.dnorm, self.dv, self.dqn, self.Y)
        if not second:
            return base
        if self._second is None:
            self._second = self._second_order(base)
        return self._second

    def _second_order(self, em: EdgeMaps) -> EdgeMaps:
        ef, n = self.ef, self.n
        v, nq = ef.v, ef.qnorm
        dq, ddq = self.dq, self.ddq
        # second derivative of tau_k from tau = |q| q / n
        d_dqT = _tan(ddq, v) + _pi(dq, v, self.dv)
        d2tau = (_s(self.dqn) * (dq + _tan(dq, v)) + _s(nq) * (ddq + d_dqT)) / n
        d2norm = _dot(d2tau, v) + _dot(self.dtau, self.dv)
        d2v = (d2tau - _s(_dot(d2tau, v) + _dot(self.dtau, self.dv)) * v
               - 2.0 * _s(self.dnorm) * self.dv) / _s(ef.norm)
        d2qn = (_dot(ddq, ef.q) + _dot(dq, dq)) / nq - _dot(dq, ef.q) ** 2 / nq**3
        out = EdgeMaps(ef, self.co, self.dnorm, self.dv, self.dqn, self.Y, d2norm, d2v, d2qn)
        out.d2tau = d2tau
        return out

    def dY(self) -> np.ndarray:
        """Rate of change of the correction vectors Y_k along the path."""
        em = self.maps(second=True)
        v, b, c = self.ef.v, self.co["b"], self.co["c"]
        xk, xdk = self.xd[:-1], self.xdd[:-1]
        dbs = self.co["db"] * self.dnorm
        dcs = self.co["dc"] * self.dnorm
        d2tau = em.d2tau
        dtau = self.dtau
        return (_s(dbs) * (xk - _tan(xk, v)) + _s(b) * (xdk - _tan(xdk, v)) + _tan(xdk, v)
                + _s(1.0 - b) * _pi(xk, v, self.dv)
                + _s(dcs) * (dtau - _tan(dtau, v)) + _s(c) * (d2tau - _tan(d2tau, v))
                + 0.5 * _tan(d2tau, v) + _s(0.5 - c) * _pi(dtau, v, self.dv))


def _correction_vector(ef, co, xk, dtau):
    v = ef.v
    t = _tan(xk, v)
    tt = _tan(dtau, v)
    return t + _s(co["b"]) * (xk - t) + 0.5 * tt + _s(co["c"]) * (dtau - tt)


def _linear_forward(A, start, rhs):
    """y_0 = start, y_{k+1} = A_k y_k + rhs_k for batched y (..., D)."""
    n = A.shape[0]
    out = np.empty(start.shape[:-1] + (n + 1, start.shape[-1]))
    out[..., 0, :] = start
    y = start
    AT = np.swapaxes(A, -1, -2)
    for k in range(n):
        y = y @ AT[k] + rhs[..., k, :]
        out[..., k + 1, :] = y
    return out


def _suffix(F, R):
    """S_{n-1} = R_{n-1}, S_k = R_k + F_k S_{k+1}."""
    n = F.shape[0]
    out = np.empty_like(R)
    y = R[..., n - 1, :]
    out[..., n - 1, :] = y
    FT = np.swapaxes(F, -1, -2)
    for k in range(n - 2, -1, -1):
        y = R[..., k, :] + y @ FT[k]
        out[..., k, :] = y
    return out


def _state(M: ManifoldSpec, P: np.ndarray, xd0: np.ndarray, dq: np.ndarray,
           xd: np.ndarray | None = None) -> GeodesicState:
    """Complete geodesic state from the curve, x_0' and the SRV rates.

    When all point velocities ``xd`` are known they are used as is (they are
    then consistent with ``dq`` by construction).
    """
    ef = edge_frame_points(M, P)
    n, K = ef.n, M.curvature
    co = edge_coefficients(ef.norm, K)
    v, nq = ef.v, ef.qnorm
    fm = _fmat(co["a"], v)
    A = ef.fwd @ fm
    Fm = fm @ ef.bwd
    em0 = EdgeMaps(ef, co)
    if xd is None:
        xd = _linear_forward(A, xd0, _mv(ef.fwd, em0.g(dq) / n))
    dtau = _s(nq / n) * (dq + _tan(dq, v))
    dnorm = _dot(dtau, v)
    dv = (dtau - _s(dnorm) * v) / _s(ef.norm)
    dqn = _dot(dq, v)
    xk = xd[:-1]
    Y = _correction_vector(ef, co, xk, dtau)
    R = _curv(K, ef.q, dq, xk)
    S = _suffix(Fm, R)
    ddq = np.zeros_like(dq)
    if n > 1:
        ddq[:-1] = -em0.g(_pad_back(ef, S))[:-1] / n
    xdd0 = -S[0] / n
    em = EdgeMaps(ef, co, dnorm, dv, dqn, Y)
    xpar = _mv(ef.bwd, xd[1:])
    rhs = em.df(xk) + (em.dg(dq) + em.g(ddq)) / n + _curv(K, ef.tau, Y, xpar)
    xdd = _linear_forward(A, xdd0, _mv(ef.fwd, rhs))
    return GeodesicState(M, P, ef, co, xd, dq, dtau, dv, dnorm, dqn, Y, R, S, ddq, xdd, A, Fm)


def _pad_back(ef, S):
    """Vectors S_{k+1} transported to x_k, with zero in the last slot."""
    out = np.zeros_like(S)
    out[..., :-1, :] = _mv(ef.bwd[:-1], S[..., 1:, :])
    return out


def state_from_velocity(curve: DiscreteCurve, w: CurveTangent) -> GeodesicState:
    """Geodesic state of the geodesic leaving ``curve`` with velocity ``w``."""
    M = curve.manifold
    P = curve.points
    ef = edge_frame_points(M, P)
    wf = w.frame
    dt = d_tau_frame(ef, wf)
    dq = np.sqrt(ef.n / ef.norm)[:, None] * (dt - 0.5 * _tan(dt, ef.v))
    return _state(M, P, wf[0], dq, xd=wf)


def curvature_terms(state: GeodesicState) -> np.ndarray:
    """R_k = R(q_k, dq_k) x_k' for every edge (frame components)."""
    return state.R


def geodesic_accel(state: GeodesicState) -> np.ndarray:
    """Covariant accelerations of all curve points along the geodesic."""
    return state.xdd


# ---------------------------------------------------------------------------
# exponential map

@dataclass
class GeodesicCache:
    """States at every sample and the point transports between samples."""

    states: list
    transports: list
    scheme: str


def _exp_model(M, x, wf, step=None):
    try:
        return mf.exp_point(M, x, mf.from_frame(M, x, wf))
    except InjectivityError as err:
        raise InjectivityError(f"{err} at step {step}", step=step) from None


def exp_map(alpha0: DiscreteCurve, w: CurveTangent, m: int = 100, scheme: str = "srv") -> CurvePath:
    """Discrete geodesic leaving ``alpha0`` with initial velocity ``w``.

    Returns a ``CurvePath`` of kind ``"geodesic"`` with ``m`` explicit
    first-order steps of size ``1/m``.
    """
    if m < 1:
        raise DomainError("m must be at least 1")
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    M = alpha0.manifold
    st = state_from_velocity(alpha0, w)
    if M.flat and scheme == "srv":
        return _exp_flat(st, m)
    eps = 1.0 / m
    states, transports = [st], []
    for j in range(m):
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                st, T = _exp_step(M, st, eps, j, scheme)
        except (ZeroDivisionError, OverflowError, ValueError):
            raise InjectivityError(f"the explicit integration blew up at step {j}; use more steps",
                                   step=j) from None
        states.append(st)
        transports.append(T)
    pts = np.stack([s.P for s in states])
    vel = np.stack([mf.from_frame(M, s.P, s.xd) for s in states])
    path = CurvePath(M, pts, vel, kind="geodesic")
    path.cache = GeodesicCache(states, transports, scheme)
    return path


def _exp_step(M, st, eps, j, scheme):
    """One explicit step of the exponential map; returns the new state and
    the point transports."""
    P = st.P
    if scheme == "srv":
        new0 = _exp_model(M, P[0], eps * st.xd[0], j)
        new, T, dqn = _srv_rebuild(M, P, new0, st.ef.q + eps * st.dq,
                                   st.dq + eps * st.ddq, j)
        xd0 = T[0] @ (st.xd[0] + eps * st.xdd[0])
        _check_finite(new, xd0, dqn, step=j)
        return _state(M, new, xd0, dqn), T
    new = _exp_model(M, P, eps * st.xd, j)
    T = mf.transport_matrix(M, P, new)
    vel = np.einsum("kij,kj->ki", T, st.xd + eps * st.xdd)
    _check_finite(new, vel, step=j)
    wn = CurveTangent.from_frame(DiscreteCurve(M, new), vel)
    return state_from_velocity(wn.base, wn), T


def _check_finite(*arrays, step):
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise InjectivityError(f"the explicit integration blew up at step {step}; use more steps",
                               step=step)


def _srv_rebuild(M, P, new0, qplus, dqplus, step):
    """Rebuild the curve from a new start point and updated SRV vectors.

    Point ``k`` moves from ``P[k]`` to ``new[k]``; the updated vectors at the
    old point are transported there and the next point is reached along the
    resulting edge.  The recursion is sequential in ``k`` and runs on Python
    floats, which is much faster than numpy for 2- and 3-vectors.
    """
    n = qplus.shape[0]
    D = P.shape[1]
    pts = P.tolist()
    qs = qplus.tolist()
    dqs = dqplus.tolist()
    new = [list(map(float, new0))]
    Ts = []
    dq_out = []
    if M.kind == "hyperbolic":
        transport, expo = _h2_transport, _h2_exp
    elif M.kind == "sphere":
        transport, expo = _s2_transport, _s2_exp
    else:
        transport, expo = _e_transport, _e_exp
    for k in range(n + 1):
        T = transport(pts[k], new[k])
        Ts.append(T)
        if k == n:
            break
        qk = _apply(T, qs[k])
        dq_out.append(_apply(T, dqs[k]))
        nrm = math.sqrt(sum(c * c for c in qk))
        try:
            new.append(expo(new[k], [nrm * c / n for c in qk]))
        except InjectivityError as err:
            raise InjectivityError(f"{err} at step {step}", step=step) from None
    return np.array(new), np.array(Ts), np.array(dq_out).reshape(n, D)


def _apply(T, w):
    return [sum(T[i][j] * w[j] for j in range(len(w))) for i in range(len(w))]


def _e_transport(x, y):
    D = len(x)
    return [[1.0 if i == j else 0.0 for j in range(D)] for i in range(D)]


def _e_exp(x, w):
    return [a + b for a, b in zip(x, w)]


def _h2_transport(x, y):
    # same angle as the vectorized kernel transport
    d0 = y[0] - x[0]
    d1 = y[1] - x[1]
    ang = math.atan2(-2.0 * d0 * (x[1] + y[1]), 4.0 * x[1] * y[1] + d1 * d1 - d0 * d0)
    c, s = math.cos(ang), math.sin(ang)
    return [[c, -s], [s, c]]


def _h2_exp(x, w):
    a, b = w
    L = math.hypot(a, b)
    sh = math.sinh(L) / L if L > 1e-4 else 1.0 + L * L / 6.0
    den = math.cosh(L) - b * sh
    return [x[0] + x[1] * a * sh / den, x[1] / den]


def _s2_transport(x, y):
    c = x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
    if 1.0 + c < 1e-12:
        raise InjectivityError("antipodal sphere points have no unique geodesic")
    A = [[y[i] * x[j] - x[i] * y[j] for j in range(3)] for i in range(3)]
    out = []
    for i in range(3):
        row = []
        for j in range(3):
            a2 = A[i][0] * A[0][j] + A[i][1] * A[1][j] + A[i][2] * A[2][j]
            row.append((1.0 if i == j else 0.0) + A[i][j] + a2 / (1.0 + c))
        out.append(row)
    return out


def _s2_exp(x, w):
    xw = x[0] * w[0] + x[1] * w[1] + x[2] * w[2]
    w = [w[i] - xw * x[i] for i in range(3)]
    t = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    if t >= math.pi:
        raise InjectivityError("sphere exponential beyond the injectivity radius (|v| >= pi)")
    ct = math.cos(t)
    sc = math.sin(t) / t if t > 1e-4 else 1.0 - t * t / 6.0
    y = [ct * x[i] + sc * w[i] for i in range(3)]
    r = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2])
    return [c / r for c in y]


def _exp_flat(st: GeodesicState, m: int) -> CurvePath:
    """Euclidean exponential map: x_0 and the SRV vectors move on straight
    lines, so every explicit step is exact and the samples are evaluated
    directly.  Only the end state is kept for Jacobi fields, which are
    affine in s as well."""
    M, n = st.manifold, st.n
    s = np.linspace(0.0, 1.0, m + 1)
    q = st.ef.q[None] + s[:, None, None] * st.dq[None]
    x0 = st.P[0][None] + s[:, None] * st.xd[0][None]
    pts = x0[:, None, :] + np.concatenate(
        [np.zeros((m + 1, 1, q.shape[-1])),
         np.cumsum(np.sqrt(_dot(q, q))[..., None] * q / n, axis=1)], axis=1)
    pts[0] = st.P
    nq = np.sqrt(_dot(q, q))[..., None]
    unit = np.divide(q, nq, out=np.zeros_like(q), where=nq > 0)
    dtau = (nq * st.dq[None] + _dot(st.dq[None], unit)[..., None] * q) / n
    vel = np.concatenate([np.broadcast_to(st.xd[0], (m + 1, 1, q.shape[-1])),
                          st.xd[0] + np.cumsum(dtau, axis=1)], axis=1)
    end = _state(M, pts[-1], st.xd[0], st.dq, xd=vel[-1])
    path = CurvePath(M, pts, vel, kind="geodesic")
    path.cache = GeodesicCache([st, end], [], "flat")
    return path


def flat_geodesic(alpha0: DiscreteCurve, alpha1: DiscreteCurve, m: int = 100) -> CurvePath:
    """Closed-form Euclidean geodesic: straight lines in SRV coordinates."""
    M = alpha0.manifold
    if not M.flat:
        raise DomainError("closed-form geodesics exist only for Euclidean curves")
    if alpha1.manifold != M or alpha1.points.shape != alpha0.points.shape:
        raise DomainError("curves are not compatible")
    relaxed = alpha0.relaxed or alpha1.relaxed
    e0 = edge_frame_points(M, alpha0.points, relaxed)
    e1 = edge_frame_points(M, alpha1.points, relaxed)
    x0, x1 = alpha0.points[0], alpha1.points[0]
    n = alpha0.n
    pts, vel = [], []
    for j in range(m + 1):
        s = j / m
        q = (1 - s) * e0.q + s * e1.q
        p = srv_inverse_frame(M, (1 - s) * x0 + s * x1, q)
        nq = np.sqrt(_dot(q, q))
        dq = e1.q - e0.q
        # x_{k+1}' = x_k' + d/ds(|q| q / n)
        unit = np.where(nq[:, None] > 0, q / np.where(nq > 0, nq, 1.0)[:, None], 0.0)
        dtau = (_s(nq) * dq + _s(_dot(dq, unit)) * q) / n
        v = np.empty_like(p)
        v[0] = x1 - x0
        v[1:] = v[0] + np.cumsum(dtau, axis=0)
        pts.append(p)
        vel.append(v)
    path = CurvePath(M, np.stack(pts), np.stack(vel), kind="geodesic")
    path.meta.update(iterations=0, converged=True, method="closed-form")
    return path


# ---------------------------------------------------------------------------
# Jacobi fields

@dataclass
class JacobiState:
    """Jacobi field along a geodesic in SRV form (frame components).

    ``J0``/``dJ0`` are the field and its derivative at the first point,
    ``aq``/``saq`` the variation of the SRV vectors and its s-derivative.  A
    leading batch axis is allowed.
    """

    J0: np.ndarray
    dJ0: np.ndarray
    aq: np.ndarray
    saq: np.ndarray


def _jacobi_points(st: GeodesicState, js: JacobiState):
    """All J_k, dJ_k plus the variation rates of the edges."""
    ef, n, K = st.ef, st.n, st.K
    em = st.maps()
    v, nq = ef.v, ef.qnorm
    J = _linear_forward(st.A, js.J0, _mv(ef.fwd, em.g(js.aq) / n))
    Jk = J[..., :-1, :]
    Jpar = em.f(Jk) + em.g(js.aq) / n
    rhs = em.df(Jk) + (em.dg(js.aq) + em.g(js.saq)) / n + _curv(K, ef.tau, st.Y, Jpar)
    dJ = _linear_forward(st.A, js.dJ0, _mv(ef.fwd, rhs))
    return J, dJ, Jpar


def jacobi_from_fields(st: GeodesicState, J: np.ndarray, dJ: np.ndarray) -> JacobiState:
    """Convert a field and its s-derivative at all points to SRV form."""
    ef, n, K = st.ef, st.n, st.K
    em = st.maps()
    atau = d_tau_frame(ef, J)
    aq = np.sqrt(n / ef.norm)[:, None] * (atau - 0.5 * _tan(atau, ef.v))
    Jk, dJk = J[..., :-1, :], dJ[..., :-1, :]
    Jpar = _mv(ef.bwd, J[..., 1:, :])
    dJpar = _mv(ef.bwd, dJ[..., 1:, :])
    inner = dJpar + _curv(K, st.Y, ef.tau, Jpar) - em.df(Jk) - em.f(dJk)
    saq = n * em.ginv(inner) + n * em.dginv(Jpar - em.f(Jk))
    return JacobiState(J[..., 0, :].copy(), dJ[..., 0, :].copy(), aq, saq)


def _jacobi_rates(st: GeodesicState, js: JacobiState):
    """Second s-derivatives of J_0 and of the SRV variations."""
    ef, n, K = st.ef, st.n, st.K
    v, q, nq, tau = ef.v, ef.q, ef.qnorm, ef.tau
    co = st.co
    J, dJ, Jpar = _jacobi_points(st, js)
    Jk, dJk = J[..., :-1, :], dJ[..., :-1, :]
    xk = st.xd[:-1]
    aq, saq = js.aq, js.saq
    # variation of the edges in the family direction
    atau = _s(nq / n) * (aq + _tan(aq, v))
    anorm = _dot(atau, v)
    av = (atau - _s(anorm) * v) / _s(ef.norm)
    aqn = _dot(aq, v)
    Z = _correction_vector(ef, co, Jk, atau)
    ea = EdgeMaps(ef, co, anorm, av, aqn, Z)
    # variation of the curvature terms
    a_sq = saq + _curv(K, Jk, xk, q)
    aR = _curv(K, aq, st.dq, xk) + _curv(K, q, a_sq, xk) + _curv(K, q, st.dq, dJk)
    Sp = np.zeros_like(st.S)
    Sp[:-1] = st.S[1:]
    Uf = ea.df_minus(Sp)
    Ug = ea.dg_minus(Sp)
    T = _suffix(st.Fm, aR + Uf)
    ddJ0 = _curv(K, st.xd[0], js.J0, st.xd[0]) - T[..., 0, :] / n
    a_ddq = np.zeros_like(aq)
    if n > 1:
        back = _mv(ef.bwd[:-1], T[..., 1:, :])
        gb = _s(nq[:-1]) * (2.0 * _tan(back, v[:-1]) + _s(co["b"][:-1]) * (back - _tan(back, v[:-1])))
        a_ddq[..., :-1, :] = -(Ug[..., :-1, :] + gb) / n
    ssaq = (a_ddq + 2.0 * _curv(K, xk, Jk, st.dq) + _curv(K, st.xdd[:-1], Jk, q)
            + _curv(K, xk, dJk, q))
    axdd0 = -T[..., 0, :] / n
    return ddJ0, ssaq, (J, dJ, Jpar, aq, saq, ssaq, atau, a_ddq, axdd0)


def jacobi_accel(st: GeodesicState, J: np.ndarray, dJ: np.ndarray) -> np.ndarray:
    """Second covariant s-derivative of a Jacobi field at every point.

    Uses the recursion over the edges obtained by differentiating
    ``J_{k+1}^par = f_k(J_k) + g_k(dq_a_k)/n`` twice.
    """
    ef, n, K = st.ef, st.n, st.K
    js = jacobi_from_fields(st, J, dJ)
    ddJ0, ssaq, (_, _, Jpar, aq, saq, *_) = _jacobi_rates(st, js)
    em = st.maps(second=True)
    Jk, dJk = J[..., :-1, :], dJ[..., :-1, :]
    dJpar = _mv(ef.bwd, dJ[..., 1:, :])
    Y, tau = st.Y, ef.tau
    dY = st.dY()
    rhs = (2.0 * em.df(dJk) + em.d2f(Jk) + em.g(ssaq) / n + 2.0 * em.dg(saq) / n + em.d2g(aq) / n
           + 2.0 * _curv(K, tau, Y, dJpar) + _curv(K, st.dtau, Y, Jpar) + _curv(K, tau, dY, Jpar)
           + _curv(K, tau, Y, _curv(K, Y, tau, Jpar)))
    return _linear_forward(st.A, ddJ0, _mv(ef.fwd, rhs))


# ---------------------------------------------------------------------------
# exact linearization of the SRV step

def _segment_coefficients(r, K):
    """Jacobi coefficients of a segment of length ``r`` and their integrals over [0, 1]."""
    a, b, _ = mf.jacobi_coefficients(r, K, 1.0)
    r = np.asarray(r, dtype=float)
    small = r < 1e-3
    safe = np.where(small, 1.0, r)
    r2 = r * r
    if K == 0:
        return a, b, np.ones_like(r), np.full_like(r, 0.5)
    if K == 1:
        ia = np.where(small, 1.0 - r2 / 6.0 + r2 * r2 / 120.0, np.sin(safe) / safe)
        ib = np.where(small, 0.5 - r2 / 24.0 + r2 * r2 / 720.0, (1.0 - np.cos(safe)) / safe**2)
    else:
        ia = np.where(small, 1.0 + r2 / 6.0 + r2 * r2 / 120.0, np.sinh(safe) / safe)
        ib = np.where(small, 0.5 + r2 / 24.0 + r2 * r2 / 720.0, (np.cosh(safe) - 1.0) / safe**2)
    return a, b, ia, ib


def _normal(x, v):
    return x - _tan(x, v)


def _d_exp(J, dv, v, a, b, T):
    """Variation of ``exp_x(w)`` from the variation ``J`` of ``x`` and ``dv`` of ``w``.

    ``v`` is the unit direction of ``w`` (zero for ``w = 0``), ``a``/``b`` the
    segment coefficients and ``T`` the transport along the segment.
    """
    out = J + (a - 1.0) * _normal(J, v) + dv + (b - 1.0) * _normal(dv, v)
    return out @ T.T


def _split_mat(v, ct, cn):
    """Matrices ``ct v v^T + cn (I - v v^T)`` for every row of ``v``."""
    vv = v[:, :, None] * v[:, None, :]
    eye = np.eye(v.shape[-1])
    return ct[:, None, None] * vv + cn[:, None, None] * (eye - vv)


def _curv_mat(K, u, w):
    """Matrix of ``I -> -R(I, u) w = -K(<u, w> I - <I, w> u)`` for every row."""
    eye = np.eye(u.shape[-1])
    return -K * (_dot(u, w)[:, None, None] * eye - u[:, :, None] * w[:, None, :])


def _aq_from_field(ef: EdgeFrame, J: np.ndarray) -> np.ndarray:
    atau = d_tau_frame(ef, J)
    return np.sqrt(ef.n / ef.norm)[:, None] * (atau - 0.5 * _tan(atau, ef.v))


def _linear_step(st: GeodesicState, nxt: GeodesicState, T: np.ndarray, eps: float,
                 J: np.ndarray, X0: np.ndarray, G: np.ndarray):
    """Derivative of one SRV exponential step.

    The variation is carried as ``J`` (all points), ``X0`` (of x_0') and
    ``G`` (of the SRV rates), batched along a leading axis.  Point ``k``
    moves along a short segment with transport ``T[k]``; moving its ends
    changes the transported vectors through the integrated curvature of the
    segment, and the next point follows through the derivative of the
    exponential map.  The recursion over the points is affine and is
    assembled edge by edge before the sequential sweep.
    """
    M, K, n = st.manifold, st.K, st.n
    ef = st.ef
    xk, q = st.xd[:-1], ef.q
    aq = _aq_from_field(ef, J)
    saq = G - _curv(K, J[..., :-1, :], xk, q)
    _, _, extra = _jacobi_rates(st, JacobiState(J[..., 0, :], X0, aq, saq))
    a_ddq, axdd0 = extra[-2], extra[-1]
    u = mf.to_frame(M, st.P, mf.log_point(M, st.P, nxt.P))
    r = np.sqrt(_dot(u, u))
    v = np.where(r[:, None] > 0, u / np.where(r > 0, r, 1.0)[:, None], 0.0)
    a, b, ia, ib = _segment_coefficients(r, K)
    # integral of the segment variation field: C J_k + B Jn_k
    C = _split_mat(v, np.full_like(a, 0.5), ia - ib * a / b)
    B = _split_mat(v, np.full_like(a, 0.5), ib / b) @ np.swapaxes(T, -1, -2)
    IJ = _mv(C, J)
    # transported SRV vectors and their rates
    wq = q + eps * st.dq
    wd = st.dq + eps * st.ddq
    Mq = _curv_mat(K, u[:-1], wq)
    Md = _curv_mat(K, u[:-1], wd)
    Tk = T[:-1]
    qt = _mv(Tk, wq)
    qn = np.sqrt(_dot(qt, qt))
    E = (qn[:, None, None] * np.eye(qt.shape[-1]) + qt[:, :, None] * qt[:, None, :] / qn[:, None, None]) / n
    enext = nxt.ef
    ea, eb, _, _ = _segment_coefficients(enext.norm, K)
    Na = _split_mat(enext.v, np.ones_like(ea), ea)
    Nb = _split_mat(enext.v, np.ones_like(eb), eb)
    TeNbET = enext.fwd @ Nb @ E @ Tk
    L = enext.fwd @ Na + TeNbET @ Mq @ B[:-1]
    c = _mv(TeNbET, aq + eps * G + _mv(Mq, IJ[..., :-1, :]))
    # the first point moves along exp(eps x_0')
    Jn0 = _d_exp(J[..., 0, :], eps * X0, v[0], a[0], b[0], T[0])
    Jn = _linear_forward(L, Jn0, c)
    I = IJ + _mv(B, Jn)
    Gn = _mv(Tk, G + eps * a_ddq + _mv(Md, I[..., :-1, :]))
    w0 = st.xd[0] + eps * st.xdd[0]
    M0 = _curv_mat(K, u[:1], w0[None])[0]
    X0n = (X0 + eps * axdd0 + I[..., 0, :] @ M0.T) @ T[0].T
    return Jn, X0n, Gn


def _linearized_propagate(cache: GeodesicCache, J: np.ndarray, dJ: np.ndarray):
    m = len(cache.transports)
    eps = 1.0 / m
    st = cache.states[0]
    K = st.K
    js = jacobi_from_fields(st, J, dJ)
    X0 = js.dJ0
    G = js.saq + _curv(K, J[..., :-1, :], st.xd[:-1], st.ef.q)
    for j in range(m):
        J, X0, G = _linear_step(cache.states[j], cache.states[j + 1], cache.transports[j], eps, J, X0, G)
    st = cache.states[m]
    aq = _aq_from_field(st.ef, J)
    saq = G - _curv(K, J[..., :-1, :], st.xd[:-1], st.ef.q)
    _, dJn, _ = _jacobi_points(st, JacobiState(J[..., 0, :], X0, aq, saq))
    return J, dJn


def _check_geodesic(path: CurvePath) -> GeodesicCache:
    if path.kind != "geodesic" or not isinstance(path.cache, GeodesicCache):
        raise ContractError("Jacobi fields need a geodesic produced by exp_map or geodesic_shoot")
    return path.cache


def _propagate(cache: GeodesicCache, J: np.ndarray, dJ: np.ndarray, scheme: str | None = None):
    """Propagate batched fields given at all points of the first curve."""
    if cache.scheme == "flat" and scheme in (None, "srv", "srv-euler"):
        js = jacobi_from_fields(cache.states[0], J, dJ)
        # no curvature: the SRV form of a flat Jacobi field is affine in s
        js = JacobiState(js.J0 + js.dJ0, js.dJ0, js.aq + js.saq, js.saq)
        Jn, dJn, _ = _jacobi_points(cache.states[1], js)
        return Jn, dJn
    if cache.scheme == "flat":
        raise ContractError("the flat fast path stores no intermediate states; "
                            "use exp_map(..., scheme='points') for the point scheme")
    scheme = scheme or cache.scheme
    if scheme not in JACOBI_SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    m = len(cache.transports)
    eps = 1.0 / m
    st = cache.states[0]
    if scheme == "srv":
        if cache.scheme != "srv":
            raise ContractError("the linearized SRV scheme needs a geodesic built with scheme='srv'")
        Jn, dJn = _linearized_propagate(cache, J, dJ)
        st = cache.states[m]
    elif scheme == "srv-euler":
        js = jacobi_from_fields(st, J, dJ)
        for j in range(m):
            st = cache.states[j]
            T = cache.transports[j]
            ddJ0, ssaq, _ = _jacobi_rates(st, js)
            Tk = T[:-1]
            js = JacobiState(
                (js.J0 + eps * js.dJ0) @ T[0].T,
                (js.dJ0 + eps * ddJ0) @ T[0].T,
                _mv(Tk, js.aq + eps * js.saq),
                _mv(Tk, js.saq + eps * ssaq),
            )
        st = cache.states[m]
        Jn, dJn, _ = _jacobi_points(st, js)
    elif scheme == "points":
        Jn, dJn = J, dJ
        for j in range(m):
            st = cache.states[j]
            T = cache.transports[j]
            ddJ = jacobi_accel(st, Jn, dJn)
            Jn, dJn = _mv(T, Jn + eps * dJn), _mv(T, dJn + eps * ddJ)
        st = cache.states[m]
    else:
        raise DomainError(f"unknown scheme {scheme!r}")
    M = st.manifold
    if M.kind == "sphere":
        Jn = mf.project_tangent(M, st.P, Jn)
        dJn = mf.project_tangent(M, st.P, dJn)
    return Jn, dJn


def jacobi_propagate(geodesic: CurvePath, J0: CurveTangent, dJ0: CurveTangent,
                     scheme: str | None = None) -> tuple[CurveTangent, CurveTangent]:
    """Value and derivative at ``s = 1`` of the Jacobi field with the given
    initial conditions along ``geodesic``."""
    cache = _check_geodesic(geodesic)
    Jn, dJn = _propagate(cache, J0.frame, dJ0.frame, scheme)
    end = geodesic.end
    return CurveTangent.from_frame(end, Jn), CurveTangent.from_frame(end, dJn)


def jacobi_matrix(geodesic: CurvePath) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrix of ``dJ(0) -> J(1)`` (with ``J(0) = 0``) in orthonormal bases.

    Returns ``(A, E0, E1)`` where ``E0``/``E1`` are the per-point bases (frame
    components, shape (n+1, D, dim)) at the first and last curves.
    """
    cache = _check_geodesic(geodesic)
    M = geodesic.manifold
    P0, P1 = geodesic.points[0], geodesic.points[-1]
    E0 = mf.tangent_basis(M, P0)
    E1 = mf.tangent_basis(M, P1)
    npts, D, dim = E0.shape
    N = npts * dim
    dJ = np.zeros((N, npts, D))
    for k in range(npts):
        for i in range(dim):
            dJ[k * dim + i, k] = E0[k, :, i]
    J = np.zeros_like(dJ)
    Jn, _ = _propagate(cache, J, dJ)
    coords = np.einsum("bkd,kdi->bki", Jn, E1).reshape(N, N)
    return coords.T, E0, E1


def jacobi_inverse(geodesic: CurvePath, target: CurveTangent) -> CurveTangent:
    """Initial derivative ``dJ(0)`` of the Jacobi field with ``J(0) = 0`` and
    ``J(1) = target``."""
    A, E0, E1 = jacobi_matrix(geodesic)
    b = np.einsum("kd,kdi->ki", target.frame, E1).reshape(-1)
    if not np.any(b):
        return CurveTangent.zeros(geodesic.start)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e13:
        raise SingularSystemError("Jacobi system is singular (conjugate points?)", condition=float(cond))
    c = np.linalg.solve(A, b).reshape(E0.shape[0], E0.shape[2])
    dJ = np.einsum("kdi,ki->kd", E0, c)
    return CurveTangent.from_frame(geodesic.start, dJ)


# ---------------------------------------------------------------------------
# shooting

def shoot_tolerance(alpha0: DiscreteCurve, alpha1: DiscreteCurve) -> float:
    return 1e-6 * (1.0 + l2_norm(pointwise_log(alpha0, alpha1)))


def geodesic_shoot(alpha0: DiscreteCurve, alpha1: DiscreteCurve, m: int = 100,
                   tol: float | None = None, max_iter: int = 50, scheme: str = "srv",
                   w0: CurveTangent | None = None, max_halvings: int = 10) -> CurvePath:
    """Geodesic from ``alpha0`` to ``alpha1`` by shooting.

    The initial velocity starts at the pointwise logarithm (or ``w0``).  Each
    iteration maps the terminal gap through the inverse Jacobi map and takes
    the resulting correction, halving it until the gap decreases.  If no
    decrease is found after ``max_halvings`` halvings the solve raises
    :class:`ShootingDivergenceError` carrying the gap history.

    ``path.meta`` holds ``iterations`` (accepted corrections), ``gaps`` (L2
    gap after each accepted iterate), ``trials`` (all evaluated gaps),
    ``converged`` and ``tol``.
    """
    M = alpha0.manifold
    if alpha1.manifold != M or alpha1.points.shape != alpha0.points.shape:
        raise DomainError("curves are not compatible")
    if tol is None:
        tol = shoot_tolerance(alpha0, alpha1)
    w = pointwise_log(alpha0, alpha1) if w0 is None else w0
    path = exp_map(alpha0, w, m, scheme)
    gap = pointwise_log(path.end, alpha1)
    gnorm = l2_norm(gap)
    gaps, trials = [gnorm], [gnorm]
    it = 0
    while gnorm >= tol and it < max_iter:
        step = jacobi_inverse(path, gap)
        eta = 1.0
        for _ in range(max_halvings + 1):
            trial = w + step * eta
            try:
                tpath = exp_map(alpha0, trial, m, scheme)
                tgap = pointwise_log(tpath.end, alpha1)
                tnorm = l2_norm(tgap)
            except (InjectivityError, DegenerateEdgeError):
                tnorm = np.inf
            trials.append(float(tnorm))
            if tnorm < gnorm:
                break
            eta *= 0.5
        else:
            raise ShootingDivergenceError(
                "shooting gap did not decrease along the Jacobi correction",
                gaps=gaps, trials=trials)
        w, path, gap, gnorm = trial, tpath, tgap, tnorm
        gaps.append(gnorm)
        it += 1
    path.meta.update(iterations=it, gaps=gaps, trials=trials, converged=bool(gnorm < tol),
                     method="shooting", tol=tol)
    return path


def initial_velocity(path: CurvePath) -> CurveTangent:
    if path.velocities is None:
        raise ContractError("path carries no velocities")
    return path.velocity(0)


def geodesic_length(path: CurvePath) -> float:
    """Length of a geodesic as the G-norm of its initial velocity."""
    w = initial_velocity(path)
    ef = edge_frame_points(path.manifold, path.points[0])
    f = w.frame
    return float(np.sqrt(max(metric_frame(ef, f, f), 0.0)))
