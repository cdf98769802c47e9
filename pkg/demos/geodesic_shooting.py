"""
Geodesics between discrete curves
=================================

Shoot the geodesic between two curves on the sphere, check it with a
Jacobi field, and compare the flat case with its closed form.
"""

import numpy as np

from geomatch import manifolds as mf
from geomatch.curves import CurveTangent, DiscreteCurve, path_speeds
from geomatch.generators import random_smooth_pair
from geomatch.geodesics import (exp_map, flat_geodesic, geodesic_length, geodesic_shoot,
                                jacobi_propagate)

S = mf.sphere2()
t = np.linspace(0.0, 1.0, 16)


def arc(lat0, lat1, lon1, wiggle):
    lat = lat0 + (lat1 - lat0) * t + wiggle * np.sin(np.pi * t)
    lon = lon1 * t
    return DiscreteCurve(S, np.c_[np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon),
                                  np.sin(lat)])


a0, a1 = arc(0.1, 0.6, 1.2, 0.1), arc(-0.2, 0.3, 1.5, -0.15)
geo = geodesic_shoot(a0, a1, m=60)
print("sphere: length", round(geodesic_length(geo), 6),
      "after", geo.meta["iterations"], "Newton iterations")
print("gap history", ["%.1e" % g for g in geo.meta["gaps"]])
sp = path_speeds(geo)
print("speed along the geodesic: min %.6f max %.6f" % (sp.min(), sp.max()))

# perturb the initial velocity and compare the end curves with a Jacobi field
w = CurveTangent(a0, geo.velocities[0])
dw = CurveTangent(a0, mf.project_tangent(S, a0.points, np.tile([0.0, 0.0, 0.1], (16, 1))))
J1, _ = jacobi_propagate(geo, CurveTangent.zeros(a0), dw)
eps = 1e-4
moved = exp_map(a0, w + dw * eps, 60).end
fd = mf.log_point(S, geo.end.points, moved.points) / eps
print("Jacobi field vs finite difference: relative error %.1e"
      % (np.linalg.norm(J1.vecs - fd) / np.linalg.norm(fd)))

# flat curves: shooting reproduces the straight line between SRV codes
b0, b1 = random_smooth_pair(30, 2, seed=1)
shot = geodesic_shoot(b0, b1, m=50)
closed = flat_geodesic(b0, b1, 50)
print("flat: shooting vs closed form, max distance %.1e"
      % np.abs(shot.points - closed.points).max())
