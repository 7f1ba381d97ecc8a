"""Mirror descent, online learning complexity and lower-bound constructions."""

__version__ = "0.1.0"

from . import adversary, complexity, experts_online, geometry, harness, losses, md_engine
from .errors import CapacityError, DomainError, ProtocolError, UnboundedError

__all__ = [
    "adversary", "complexity", "experts_online", "geometry", "harness", "losses", "md_engine",
    "CapacityError", "DomainError", "ProtocolError", "UnboundedError", "__version__",
]
