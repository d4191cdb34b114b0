"""Entropic multi-marginal transport solvers for dynamic network flow problems."""
from .diagnostics import FlowSolution, SolveReport, dual_objective, entropy, mismatch_report, primal_objective
from .graph_model import (
    EDGES_AND_VERTICES,
    EDGES_ONLY,
    EDGES_WITH_SELF_STAY,
    TRAFFIC_ROUTING,
    Edge,
    Network,
    StateSpace,
    StoragePolicy,
    StructureMatrix,
    ValidationError,
    build_state_space,
    build_structure_matrix,
    time_expand,
)
from .problems import (
    GridSpec,
    MultiCommodityProblem,
    ProblemFormatError,
    RandomDenseSpec,
    SingleCommodityProblem,
    TrafficSpec,
    generate,
    load,
    save,
    validate,
)
from .sinkhorn_path import InfeasibleError
from .estimator import DynamicFlowSolver, solve

__version__ = "0.1.0"
