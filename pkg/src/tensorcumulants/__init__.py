"""Graph moments, Weingarten calculus, and free cumulants of symmetric tensors."""

from .multigraph import (
    CapacityError,
    Multigraph,
    OpenMultigraph,
    decompose,
    disjoint_union,
    enumerate_closed,
    enumerate_open,
    eaut_count,
    load_graph,
)

__all__ = [
    "CapacityError",
    "Multigraph",
    "OpenMultigraph",
    "decompose",
    "disjoint_union",
    "enumerate_closed",
    "enumerate_open",
    "eaut_count",
    "load_graph",
]
