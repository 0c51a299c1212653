"""Full-amplitude simulator for random supremacy circuits with an emulated multi-rank backend."""

from .circuit import Circuit, Gate, GateKind, generate_supremacy, parse, serialize, stats
from .fusion import Cluster, GateMatrix, fuse
from .scheduler import CompileConfig, SchedulePlan, compile

__all__ = [
    "Circuit",
    "Gate",
    "GateKind",
    "generate_supremacy",
    "parse",
    "serialize",
    "stats",
    "Cluster",
    "GateMatrix",
    "fuse",
    "CompileConfig",
    "SchedulePlan",
    "compile",
]
__version__ = "0.1.0"
