"""Bandwidth-aware planning of parallel WAN connections between DCs."""

from wanify.errors import ValidationError
from wanify.planner import ConnectionPlan, build_plan
from wanify.relations import infer_dc_relations
from wanify.topology import Dc, Topology, haversine_miles

__version__ = "0.1.0"

__all__ = [
    "ConnectionPlan",
    "Dc",
    "Topology",
    "ValidationError",
    "build_plan",
    "haversine_miles",
    "infer_dc_relations",
    "__version__",
]
