"""
Optimal matching by horizontal geodesics
========================================

A curve and a translated, nonuniformly resampled copy: the unmatched
geodesic pays for the reparameterization, the matched one only for the
translation.  Dynamic programming gives a reference value.
"""

import numpy as np

from geomatch.generators import translated_reparameterized, turn_pair
from geomatch.geodesics import flat_geodesic, geodesic_length
from geomatch.matching import dp_match, optimal_match, verticality_ratio

a0, a1, u = translated_reparameterized(30)
raw = flat_geodesic(a0, a1)
geo, match = optimal_match(a0, a1)
print("translation norm      %.4f" % np.linalg.norm(u))
print("unmatched geodesic    %.4f (max verticality %.3f)"
      % (geodesic_length(raw), verticality_ratio(raw).max()))
print("optimal matching      %.4f (max verticality %.4f, %d iterations, stop: %s)"
      % (geodesic_length(geo), verticality_ratio(geo).max(), match.iterations, match.reason))
print("length history", np.round(match.length_history, 5))

dp_geo, dp = dp_match(a0, a1)
print("dynamic programming   %.4f" % geodesic_length(dp_geo))

# the reparameterization found: phi(k/n) is where the matched target samples a1
print("phi at quarters", np.round(np.interp([0.25, 0.5, 0.75],
                                            np.linspace(0, 1, a0.n + 1), match.phi), 4))

# a 3D pair: the same trajectory before and after a turn
b0, b1 = turn_pair(30)
om_geo, _ = optimal_match(b0, b1)
dp_geo, _ = dp_match(b0, b1)
print("turn pair: unmatched %.4f, optimal matching %.4f, dynamic programming %.4f"
      % (geodesic_length(flat_geodesic(b0, b1)), geodesic_length(om_geo),
         geodesic_length(dp_geo)))
