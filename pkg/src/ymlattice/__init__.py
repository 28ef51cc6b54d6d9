"""Discrete two-dimensional Yang-Mills measures per bundle class on fat graphs."""
from .fatgraph import AreaMap, FatGraph, GraphError
from .groups import GroupContext, UnsupportedGroup
from .lattice import GaugeTransform, MeasureSpec, PartitionEstimate

__all__ = [
    "AreaMap",
    "FatGraph",
    "GraphError",
    "GroupContext",
    "UnsupportedGroup",
    "GaugeTransform",
    "MeasureSpec",
    "PartitionEstimate",
]
__version__ = "0.1.0"
