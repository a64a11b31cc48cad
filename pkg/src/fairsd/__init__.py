"""Serial orders that minimise expected justified envy under serial dictatorship."""

from .aggregation import AggregationMethod, aggregate
from .core import PreferenceProfile, Problem, count_justified_envy, run_sd
from .distributions import DistributionSpec
from .evaluation import expected_envy_exact, expected_envy_mc
from .solver import solve
from .weights import build_weights

__all__ = [
    "AggregationMethod",
    "DistributionSpec",
    "PreferenceProfile",
    "Problem",
    "aggregate",
    "build_weights",
    "count_justified_envy",
    "expected_envy_exact",
    "expected_envy_mc",
    "run_sd",
    "solve",
]
