"""Wasserstein barycenters of finite ensembles on model spaces, with regularity checks."""
from .barycenter import BarycenterResult, lln_run, verify_optimality, wasserstein_barycenter
from .frechet import FrechetNonConvergence, FrechetResult, frechet_mean, selection_B
from .gauge import ClampedEntropy, GridDensity, IntegrabilityGauge, build_gauge, displacement_functional
from .geometry import ModelManifold, dist, euclidean, exp_map, hyperbolic, log_map, sphere
from .measures import DiscreteMeasure, MeasureEnsemble, w2
from .mmot import MultiMarginalPlan, mmot_oracle, solve_mmot

__version__ = "0.1.0"

__all__ = [
    "BarycenterResult",
    "ClampedEntropy",
    "DiscreteMeasure",
    "FrechetNonConvergence",
    "FrechetResult",
    "GridDensity",
    "IntegrabilityGauge",
    "MeasureEnsemble",
    "ModelManifold",
    "MultiMarginalPlan",
    "build_gauge",
    "displacement_functional",
    "dist",
    "euclidean",
    "exp_map",
    "frechet_mean",
    "hyperbolic",
    "lln_run",
    "log_map",
    "mmot_oracle",
    "selection_B",
    "solve_mmot",
    "sphere",
    "verify_optimality",
    "w2",
    "wasserstein_barycenter",
]
