"""Centerpoint cutting-plane minimization on Hadamard manifolds."""

__version__ = "0.1.0"

from .centerpoint import DepthEstimate, NonConvergenceError, centrality, find_centerpoint, karcher_mean
from .cuts import FeasibleRegion, HalfspaceCut, ZeroSubgradient, chart_halfspace, separate
from .manifold import SPD, ChartError, Euclidean, KleinHyperbolic, make_manifold
from .optimizer import OptimizerConfig, OptimizerTrace, SubgradientOracle, minimize
from .sampling import DegenerateRegionError, SampleSet, estimate_volume, sample_region

__all__ = [
    "SPD",
    "ChartError",
    "Euclidean",
    "KleinHyperbolic",
    "make_manifold",
    "HalfspaceCut",
    "FeasibleRegion",
    "ZeroSubgradient",
    "chart_halfspace",
    "separate",
    "SampleSet",
    "DegenerateRegionError",
    "sample_region",
    "estimate_volume",
    "DepthEstimate",
    "NonConvergenceError",
    "centrality",
    "karcher_mean",
    "find_centerpoint",
    "SubgradientOracle",
    "OptimizerConfig",
    "OptimizerTrace",
    "minimize",
]
