"""hetgain: heterogeneity-gain analysis and reward design for multi-agent
task allocation built from nested generalized aggregators."""

__version__ = "0.1.0"

from .aggregators import AggregatorSpec, Family
from .gains import AllocationMatrix, GainReport, RewardStructure

__all__ = [
    "__version__",
    "AggregatorSpec",
    "Family",
    "AllocationMatrix",
    "GainReport",
    "RewardStructure",
]
