"""Two-level GI/G/1 queue: exact chain, simulation, diffusion limit and stationary-equation checks."""

from .dists import DistributionSpec, DomainError, RngStream
from .limits import LimitDistribution
from .model import HeavyTrafficFamily, QueueParams, instantiate

__all__ = [
    "DistributionSpec",
    "DomainError",
    "HeavyTrafficFamily",
    "LimitDistribution",
    "QueueParams",
    "RngStream",
    "instantiate",
]
__version__ = "0.1.0"
