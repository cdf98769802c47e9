"""Shape statistics: shape distance, Karcher mean, distance matrices and
agglomerative clustering."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveTangent, DiscreteCurve, norm_gn
from .errors import DomainError
from .geodesics import exp_map, geodesic_length, initial_velocity
from .matching import MatchConfig, ShapeSpline, optimal_match

log = logging.getLogger(__name__)

LINKAGES = ("single", "complete", "average")


def shape_distance(a0: DiscreteCurve, a1: DiscreteCurve, cfg: MatchConfig | None = None) -> float:
    """Length of the horizontal geodesic from ``a0`` to the shape of ``a1``."""
    _, match = optimal_match(a0, a1, cfg)
    return float(min(match.length_history))


# ---------------------------------------------------------------------------
# Karcher mean

@dataclass
class KarcherResult:
    mean: DiscreteCurve
    iterations: int
    converged: bool
    gradient_norms: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    representatives: list = field(default_factory=list)


def _check_compatible(curves):
    if not curves:
        raise DomainError("need at least one curve")
    M, shape = curves[0].manifold, curves[0].points.shape
    for c in curves[1:]:
        if c.manifold != M or c.points.shape != shape:
            raise DomainError("curves are not compatible")


def karcher_mean(curves: list, cfg: MatchConfig | None = None, tol: float | None = None,
                 max_iter: int = 30, full: bool = False):
    """Karcher mean of curve shapes by averaging horizontal initial velocities.

    Each iteration matches every sample onto the current mean (warm-started
    from its previous matched parameterization, always on the sample's own
    spline shape), averages the initial velocities of the horizontal
    geodesics and steps along the exponential map.  A step that increases
    the objective (sum of squared distances) is undone and halved.

    ``tol`` defaults to ``1e-4`` times the mean distance from the initial
    mean to the samples.  Returns the mean, or a :class:`KarcherResult` when
    ``full`` is set.
    """
    cfg = cfg or MatchConfig()
    curves = list(curves)
    _check_compatible(curves)
    mean = curves[0]
    if len(curves) == 1:
        res = KarcherResult(mean, 1, True, [0.0], [0.0], [mean])
        return res if full else mean
    splines = [ShapeSpline(c) for c in curves]
    thetas = [None] * len(curves)
    reps = list(curves)
    step = 1.0
    prev = None
    grads, objs = [], []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        ws, dists, new_thetas, new_reps = [], [], [], []
        for i, c in enumerate(curves):
            geo, match = optimal_match(mean, c, cfg, theta0=thetas[i], spline=splines[i])
            ws.append(initial_velocity(geo).frame)
            dists.append(geodesic_length(geo))
            new_thetas.append(match.phi)
            new_reps.append(match.matched)
        obj = float(np.sum(np.square(dists)))
        if prev is not None and obj > prev[1] + 1e-6 * max(prev[1], 1e-300):
            # undo and retry with half the step
            step *= 0.5
            log.info("Karcher objective rose to %.6g; halving the step to %.3g", obj, step)
            if step < 1e-6:
                mean = prev[0]
                break
            mean = exp_map(prev[0], CurveTangent.from_frame(prev[0], step * prev[2]), cfg.steps).end
            continue
        if tol is None:
            tol = 1e-4 * float(np.mean(dists)) if np.mean(dists) > 0 else 1e-12
        thetas, reps = new_thetas, new_reps
        w = np.mean(ws, axis=0)
        wt = CurveTangent.from_frame(mean, w)
        g = norm_gn(mean, wt)
        grads.append(g)
        objs.append(obj)
        log.debug("Karcher iteration %d: objective %.10g, gradient %.3e", it, obj, g)
        if g < tol:
            converged = True
            break
        prev = (mean, obj, w)
        mean = exp_map(mean, wt * step, cfg.steps).end
    res = KarcherResult(mean, it, converged, grads, objs, reps)
    return res if full else mean


# ---------------------------------------------------------------------------
# distance matrix and clustering

@dataclass
class DistanceMatrix:
    labels: list
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(self.labels):
            raise DomainError("distance matrix shape does not match the labels")
        v = 0.5 * (v + v.T)
        np.fill_diagonal(v, 0.0)
        if np.any(v < 0):
            raise DomainError("distances must be nonnegative")
        self.values = v


def distance_matrix(curves: list, cfg: MatchConfig | None = None, labels=None,
                    symmetric_runs: bool = True) -> DistanceMatrix:
    """Pairwise shape distances.  Both matching directions are computed and
    averaged unless ``symmetric_runs`` is off (then only ``i < j``)."""
    curves = list(curves)
    if len(curves) < 2:
        raise DomainError("need at least two curves")
    _check_compatible(curves)
    N = len(curves)
    labels = list(labels) if labels is not None else [str(i) for i in range(N)]
    D = np.zeros((N, N))
    for i in range(N):
        for j in range(N):
            if i == j or (not symmetric_runs and j < i):
                continue
            D[i, j] = shape_distance(curves[i], curves[j], cfg)
            if not symmetric_runs:
                D[j, i] = D[i, j]
    return DistanceMatrix(labels, D)


@dataclass
class Dendrogram:
    """Merge sequence ``(cluster_a, cluster_b, height, size)``.

    Singletons are clusters ``0..N-1``; merge ``i`` creates cluster ``N+i``.
    """

    n_leaves: int
    merges: list
    linkage: str

    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def cut(self, k: int | None = None, height: float | None = None) -> np.ndarray:
        """Flat labels for ``k`` clusters or for a cut at ``height``.

        Labels are numbered by first appearance along the leaf order.
        """
        N = self.n_leaves
        if (k is None) == (height is None):
            raise DomainError("give exactly one of k or height")
        if k is not None:
            if not 1 <= k <= N:
                raise DomainError("k must be between 1 and the number of curves")
            used = N - k
        else:
            used = int(np.sum(self.heights() <= height))
        parent = list(range(N + len(self.merges)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, (a, b, _, _) in enumerate(self.merges[:used]):
            parent[find(a)] = N + i
            parent[find(b)] = N + i
        roots = [find(i) for i in range(N)]
        order = {}
        out = np.empty(N, dtype=int)
        for i, r in enumerate(roots):
            out[i] = order.setdefault(r, len(order))
        return out

    def to_linkage_matrix(self) -> np.ndarray:
        """SciPy-style ``(N-1, 4)`` linkage matrix."""
        return np.array([[a, b, h, s] for a, b, h, s in self.merges], dtype=float)


def cluster(matrix: DistanceMatrix | np.ndarray, k: int | None = None, height: float | None = None,
            linkage: str = "average"):
    """Agglomerative clustering; returns ``(labels, dendrogram)``.

    At each step the two closest clusters merge; ties go to the pair with
    the lexicographically smallest cluster ids.  Without ``k`` or
    ``height`` the labels are those of a single cluster.
    """
    if linkage not in LINKAGES:
        raise DomainError(f"unknown linkage {linkage!r}")
    D = matrix.values if isinstance(matrix, DistanceMatrix) else DistanceMatrix(
        [str(i) for i in range(len(matrix))], matrix).values
    N = D.shape[0]
    members = {i: [i] for i in range(N)}
    merges = []
    next_id = N
    while len(members) > 1:
        ids = sorted(members)
        best, pair = np.inf, None
        for ia, a in enumerate(ids):
            for b in ids[ia + 1:]:
                block = D[np.ix_(members[a], members[b])]
                if linkage == "single":
                    d = block.min()
                elif linkage == "complete":
                    d = block.max()
                else:
                    d = block.mean()
                if d < best:
                    best, pair = d, (a, b)
        a, b = pair
        merged = members.pop(a) + members.pop(b)
        merges.append((a, b, float(best), len(merged)))
        members[next_id] = sorted(merged)
        next_id += 1
    dend = Dendrogram(N, merges, linkage)
    if k is None and height is None:
        return np.zeros(N, dtype=int), dend
    return dend.cut(k, height), dend
