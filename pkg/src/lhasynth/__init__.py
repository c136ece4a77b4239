"""Synthesis of linear hybrid automata with minimal precision from time series."""

from .automaton import (
    Box,
    DiscreteStructure,
    Execution,
    Lha,
    SelfCheckError,
    SynthesisConfig,
    SynthesisResult,
    best_execution,
    build_lha,
    check_epsilon_capture,
    dumps_model,
    induce_discrete_structure,
    induce_execution,
    loads_model,
    synthesize,
    validate_execution,
)
from .flowpoly import (
    FlowPolyhedron,
    LinearConstraint,
    LPError,
    SolutionPoint,
    VariableLayout,
    build_flow_polyhedron,
    intersect,
    minimize_epsilon,
)
from .segmentation import ClusterResult, PieceMapping, assign_locations, choose_num_locations, kmeans
from .timeseries import (
    PwlFunction,
    TimeSeries,
    TimeSeriesError,
    distance,
    evaluate_pwl,
    parse_time_series,
    piece_slopes,
    simplify_rdp,
)

__version__ = "0.1.0"
