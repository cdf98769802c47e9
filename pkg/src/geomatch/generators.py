"""Synthetic curve generators mirroring the test shapes used in the experiments.

Every generator is deterministic given its ``seed`` and returns
``DiscreteCurve`` objects (or a dict of named curves).
"""

from __future__ import annotations

import numpy as np

from . import manifolds as mf
from .curves import DiscreteCurve
from .errors import DomainError


def _grid(n):
    return np.linspace(0.0, 1.0, n + 1)


def _warp(t, strength):
    """Increasing diffeomorphism of [0, 1]; strength 0 is the identity."""
    if strength == 0:
        return t
    return np.expm1(strength * t) / np.expm1(strength)


def _smooth_field(rng, t, d, modes=5, decay=2.0):
    return sum(rng.normal(size=d) * np.sin((j + 1) * np.pi * t[:, None]) / (j + 1) ** decay
               for j in range(modes))


def random_smooth_pair(n: int = 30, d: int = 2, seed: int = 0, deform: float = 0.3):
    """A random smooth curve and a smoothly deformed, translated copy."""
    rng = np.random.default_rng(seed)
    t = _grid(n)
    base = _smooth_field(rng, t, d) + t[:, None] * rng.normal(size=d) * 2.0
    other = base + deform * _smooth_field(rng, t, d) + rng.normal(size=d)
    M = mf.euclidean(d)
    return DiscreteCurve(M, base), DiscreteCurve(M, other)


def circle_vs_segment(n: int = 30):
    """Half circle against a straight segment, both arc-length sampled."""
    t = _grid(n)
    M = mf.euclidean(2)
    arc = np.c_[-np.cos(np.pi * t), np.sin(np.pi * t)]
    seg = np.c_[2.0 * t - 1.0, np.full_like(t, -0.5)]
    return DiscreteCurve(M, arc), DiscreteCurve(M, seg)


def _profile(t):
    return np.c_[np.cos(np.pi * t) * (1.0 + 0.3 * t), np.sin(np.pi * t) * (1.2 - 0.2 * t)]


def translated_reparameterized(n: int = 30, dim: int = 2, shift=None, strength: float = 2.0):
    """A curve and a translated copy sampled with a nonuniform parameter.

    Returns ``(alpha0, alpha1, u)`` where ``u`` is the translation.
    """
    t = _grid(n)
    base = _profile(t)
    warped = _profile(_warp(t, strength))
    if dim == 3:
        base = np.c_[base, 0.4 * t**2]
        warped = np.c_[warped, 0.4 * _warp(t, strength) ** 2]
    elif dim != 2:
        raise DomainError("dimension must be 2 or 3")
    u = np.asarray(shift if shift is not None else ([0.8, -0.5, 0.3][:dim]), dtype=float)
    M = mf.euclidean(dim)
    return DiscreteCurve(M, base), DiscreteCurve(M, warped + u), u


def _turn_curve(t, where, sharp=12.0):
    """3D curve going straight, then turning at parameter ``where``."""
    # heading angle rises smoothly from 0 to pi/2 around `where`
    ang = 0.5 * np.pi / (1.0 + np.exp(-sharp * (t - where)))
    dt = np.gradient(t)
    x = np.cumsum(np.cos(ang) * dt)
    y = np.cumsum(np.sin(ang) * dt)
    z = 0.3 * np.sin(np.pi * t)
    return np.c_[x - x[0], y - y[0], z]


def turn_pair(n: int = 30, first: float = 0.3, second: float = 0.6):
    """Two 3D curves whose turn happens at different parameters."""
    t = np.linspace(0.0, 1.0, 20 * n + 1)
    a = _turn_curve(t, first)[::20]
    b = _turn_curve(t, second)[::20] + np.array([0.1, -0.2, 0.1])
    M = mf.euclidean(3)
    return DiscreteCurve(M, a), DiscreteCurve(M, b)


def h2_segments(n: int = 20):
    """Vertical and horizontal segments of the hyperbolic half-plane."""
    t = _grid(n)
    M = mf.hyperbolic_plane()
    vert = np.c_[np.zeros_like(t), 1.0 + 2.0 * t]
    horiz = np.c_[-1.0 + 2.0 * t, np.full_like(t, 2.0)]
    return DiscreteCurve(M, vert), DiscreteCurve(M, horiz)


def sphere_arc(n: int = 20, lon0: float = 0.0, lat0: float = 0.2, length: float = 1.2,
               bend: float = 0.4):
    """A bent arc on the sphere parameterized by constant-speed longitude."""
    t = _grid(n)
    lon = lon0 + length * t
    lat = lat0 + bend * np.sin(np.pi * t) * 0.5
    return DiscreteCurve(mf.sphere2(), _sph(lat, lon))


def _sph(lat, lon):
    return np.c_[np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)]


def two_bundles(n: int = 20, per_group: int = 5, seed: int = 7, offset: float = 3.0,
                noise: float = 0.05):
    """Two groups of perturbed flat trajectories separated by ``offset``.

    Returns ``(curves, labels)`` with labels 0 and 1.
    """
    rng = np.random.default_rng(seed)
    t = _grid(n)
    route_a = np.c_[4.0 * t, 1.0 * np.sin(np.pi * t)]
    route_b = np.c_[4.0 * t, -1.0 * np.sin(np.pi * t) - offset * np.sin(np.pi * t) ** 2]
    M = mf.euclidean(2)
    curves, labels = [], []
    for g, route in enumerate((route_a, route_b)):
        for _ in range(per_group):
            bump = noise * _smooth_field(rng, t, 2, modes=3)
            curves.append(DiscreteCurve(M, route + bump))
            labels.append(g)
    return curves, np.array(labels)


GENERATORS = {
    "circle-segment": lambda n, seed: circle_vs_segment(n),
    "translated": lambda n, seed: translated_reparameterized(n)[:2],
    "translated3d": lambda n, seed: translated_reparameterized(n, 3)[:2],
    "turns": lambda n, seed: turn_pair(n),
    "h2-segments": lambda n, seed: h2_segments(n),
    "random-pair": lambda n, seed: random_smooth_pair(n, 2, seed),
    "two-bundles": lambda n, seed: tuple(two_bundles(n, seed=seed)[0]),
}
