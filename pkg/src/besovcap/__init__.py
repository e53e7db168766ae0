"""Hajlasz-Besov capacity, gamma-medians and covering contents on finite metric measure spaces."""

from .capacity import (CapacityProblem, CapacityResult, SolverConfig, capacity, capacity_of,
                       covering_cutoff, cutoff_admissible)
from .content import (ContentResult, Covering, Gauge, compare_capacity_content, covering_cost,
                      hausdorff_content, netrusov_content)
from .gradient import (BesovNorm, BesovParams, GradientSequence, besov_norm, canonical_gradient,
                       check_gradient, minimal_gradient, mixed_norm)
from .median import gamma_median, median_convolution, partition_of_unity
from .space import Ball, MetricMeasureSpace, generate, load_space, space_from_json

__all__ = [
    "Ball", "BesovNorm", "BesovParams", "CapacityProblem", "CapacityResult", "ContentResult",
    "Covering", "Gauge", "GradientSequence", "MetricMeasureSpace", "SolverConfig", "besov_norm",
    "canonical_gradient", "capacity", "capacity_of", "check_gradient", "compare_capacity_content",
    "covering_cost", "covering_cutoff", "cutoff_admissible", "gamma_median", "generate",
    "hausdorff_content", "load_space", "median_convolution", "minimal_gradient", "mixed_norm",
    "netrusov_content", "partition_of_unity", "space_from_json",
]
