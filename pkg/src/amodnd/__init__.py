"""Network design for autonomous mobility-on-demand by column generation.

The solver selects road edges to instrument under a budget and routes OD
flows over elementary paths within per-OD travel-time limits, maximizing
profit. The LP relaxation is solved by column generation with exact
resource-constrained pricing, and integer designs are recovered by branch
and bound over the generated paths.
"""

from .colgen import CgParams, CgResult, column_generation, optimality_gap, recover_integer, run_column_generation
from .master import Demand, Instance, RobustConfig, apply_robust, build_rmp
from .mip import MipParams, solve_restricted_milp
from .network import Edge, Network, Node, build_network, preprocess_od
from .pricing import solve_sprc

__all__ = [
    "CgParams",
    "CgResult",
    "Demand",
    "Edge",
    "Instance",
    "MipParams",
    "Network",
    "Node",
    "RobustConfig",
    "apply_robust",
    "build_network",
    "build_rmp",
    "column_generation",
    "optimality_gap",
    "preprocess_od",
    "recover_integer",
    "run_column_generation",
    "solve_restricted_milp",
    "solve_sprc",
]
