"""Elastic shape analysis of discrete curves in constant-curvature spaces.

Curves are sequences of points in Euclidean space, the hyperbolic half-plane
or the unit sphere.  The package computes geodesics of a discrete elastic
metric by shooting, optimal reparameterizations by horizontal geodesics, a
dynamic-programming baseline, Karcher means and clusterings.
"""

from .curves import (CurvePath, CurveTangent, DiscreteCurve, metric_gn, norm_gn,
                     path_energy, path_length, srv, srv_inverse)
from .errors import (ContractError, CurveFileError, DegenerateEdgeError, DomainError,
                     GeomatchError, InjectivityError, MonotonicityError,
                     ShootingDivergenceError, SingularSystemError)
from .geodesics import (exp_map, flat_geodesic, geodesic_length, geodesic_shoot,
                        initial_velocity, jacobi_inverse, jacobi_propagate)
from .io import load_curves, load_path, save_curves, save_path
from .manifolds import ManifoldSpec, euclidean, hyperbolic_plane, sphere2
from .matching import (MatchConfig, Matching, decompose_tangent, dp_match,
                       horizontal_part_of_path, optimal_match, verticality_ratio)
from .statistics import cluster, distance_matrix, karcher_mean, shape_distance

__version__ = "0.1.0"

__all__ = [
    "ContractError", "CurveFileError", "CurvePath", "CurveTangent", "DegenerateEdgeError",
    "DiscreteCurve", "DomainError", "GeomatchError", "InjectivityError", "ManifoldSpec",
    "MatchConfig", "Matching", "MonotonicityError", "ShootingDivergenceError",
    "SingularSystemError", "cluster", "decompose_tangent", "distance_matrix", "dp_match",
    "euclidean", "exp_map", "flat_geodesic", "geodesic_length", "geodesic_shoot",
    "horizontal_part_of_path", "hyperbolic_plane", "initial_velocity", "jacobi_inverse",
    "jacobi_propagate", "karcher_mean", "load_curves", "load_path", "metric_gn", "norm_gn",
    "optimal_match", "path_energy", "path_length", "save_curves", "save_path",
    "shape_distance", "sphere2", "srv", "srv_inverse", "verticality_ratio",
]
