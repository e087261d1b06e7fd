"""Online selection under linearly correlated arrivals."""

from .distributions import DiscreteDistribution, SupportExplosionError
from .model import LinearInstance, load_instance, save_instance
from .oracle import Estimate

__all__ = [
    "DiscreteDistribution",
    "Estimate",
    "LinearInstance",
    "SupportExplosionError",
    "load_instance",
    "save_instance",
]
__version__ = "0.1.0"
