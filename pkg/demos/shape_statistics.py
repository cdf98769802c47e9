"""
Mean shapes and clustering
==========================

Karcher mean of a few reparameterized curves, then hierarchical
clustering of two bundles of trajectories by shape distance.
"""

import numpy as np

from geomatch.generators import translated_reparameterized, two_bundles
from geomatch.matching import MatchConfig
from geomatch.statistics import cluster, distance_matrix, karcher_mean

cfg = MatchConfig(steps=30)

# three curves of one shape, shifted and sampled differently
curves = [translated_reparameterized(16, shift=s, strength=g)[1]
          for s, g in (([0.3, 0.0], 1.5), ([-0.3, 0.2], -1.0), ([0.0, -0.2], 0.5))]
res = karcher_mean(curves, cfg, full=True)
print("Karcher mean: %d iterations, converged %s" % (res.iterations, res.converged))
print("objective", np.round(res.objectives, 6))
# the shifts average to zero, so the mean starts where the unshifted profile does
print("mean start point", np.round(res.mean.points[0], 4))

# two groups of noisy trajectories along different routes
curves, truth = two_bundles(n=12, per_group=3)
dm = distance_matrix(curves, cfg)
np.set_printoptions(precision=3, suppress=True)
print("distances\n", dm.values)
for linkage in ("single", "complete", "average"):
    labels, dend = cluster(dm, k=2, linkage=linkage)
    print(f"{linkage:8s} clusters {labels}  truth {truth}  merge heights {dend.heights()}")
