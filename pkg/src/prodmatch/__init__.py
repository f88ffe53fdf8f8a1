"""Geometrically consistent shape matching via dual decomposition over BDDs."""

from .bdd import ArcCosts, Bdd, MinMarginalPair, build_equality_bdd, reduce_bdd
from .errors import (
    DegenerateTriangle,
    EmptyFeasibleSet,
    FeatureDimensionMismatch,
    FileFormatError,
    GenusMismatch,
    InfeasibleAfterFixing,
    InfeasibleInput,
    MeshError,
    NotClosed,
    NotManifold,
    ProdmatchError,
    PrunedInfeasible,
    SplitAtTerminalLayer,
)

__all__ = [
    "ArcCosts",
    "Bdd",
    "MinMarginalPair",
    "build_equality_bdd",
    "reduce_bdd",
    "ProdmatchError",
    "EmptyFeasibleSet",
    "SplitAtTerminalLayer",
    "InfeasibleAfterFixing",
    "PrunedInfeasible",
    "MeshError",
    "NotManifold",
    "NotClosed",
    "GenusMismatch",
    "DegenerateTriangle",
    "FeatureDimensionMismatch",
    "InfeasibleInput",
    "FileFormatError",
]

__version__ = "0.1.0"
