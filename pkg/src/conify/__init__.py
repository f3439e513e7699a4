"""conify: parse, DCP-check, canonize to conic form, and verify numerically.

The pipeline is parse -> dcp_check -> reduce_problem -> emit, with backmap
carrying solutions of the emitted conic problem back to the source problem
and a brute-force grid oracle standing in for a real solver.
"""

from .atoms import ATOMS, GraphImplementation, check_is_greatest, graph_impl, trivial_graph_impl
from .conic import (
    ConeBlock,
    ConicProblem,
    DualCertificate,
    SolutionFile,
    StrictComparatorRemains,
    UnboundParameter,
    UnrecognizedShape,
    check_dual_bound,
    check_primal,
    cone_member,
    constraint_shape,
    dual_cone_member,
    emit,
    read_conic,
    read_solution,
    write_conic,
    write_solution,
)
from .dcp import DcpVerdict, Diagnosis, OccPath, Polarity, curvature_of, dcp_check, polarity_of, sign_of
from .dsl import DslError, parse, parse_constraint_in, parse_expr_in, print_constraint, print_expr, print_problem
from .oracle import (
    Axis,
    GridResult,
    Infeasible,
    OracleError,
    SearchBox,
    grid_minimize,
    grid_minimize_conic,
    sample_feasible,
)
from .problem import (
    Assignment,
    Call,
    ConifyError,
    Const,
    Constraint,
    DomainError,
    Expr,
    Param,
    ParamDecl,
    Problem,
    UnboundName,
    Var,
    check_feasible,
    evaluate,
    objective_value,
)
from .reduce import (
    NotConeRepresentable,
    ReduceError,
    ReductionTrace,
    TraceStep,
    apply_step,
    backmap,
    canonize,
    eliminate_redundant,
    forward_map,
    graph_expand,
    linearize,
    read_trace,
    reduce_problem,
    verify_trace_sampled,
    write_trace,
)

__version__ = "0.1.0"

__all__ = [
    "ATOMS",
    "Assignment",
    "Axis",
    "Call",
    "ConeBlock",
    "ConicProblem",
    "ConifyError",
    "Const",
    "Constraint",
    "DcpVerdict",
    "Diagnosis",
    "DomainError",
    "DslError",
    "DualCertificate",
    "Expr",
    "GraphImplementation",
    "GridResult",
    "Infeasible",
    "NotConeRepresentable",
    "OccPath",
    "OracleError",
    "Param",
    "ParamDecl",
    "Polarity",
    "Problem",
    "ReduceError",
    "ReductionTrace",
    "SearchBox",
    "SolutionFile",
    "StrictComparatorRemains",
    "TraceStep",
    "UnboundName",
    "UnboundParameter",
    "UnrecognizedShape",
    "Var",
    "apply_step",
    "backmap",
    "canonize",
    "check_dual_bound",
    "check_feasible",
    "check_is_greatest",
    "check_primal",
    "cone_member",
    "constraint_shape",
    "curvature_of",
    "dcp_check",
    "dual_cone_member",
    "eliminate_redundant",
    "emit",
    "evaluate",
    "forward_map",
    "graph_expand",
    "graph_impl",
    "grid_minimize",
    "grid_minimize_conic",
    "linearize",
    "objective_value",
    "parse",
    "parse_constraint_in",
    "parse_expr_in",
    "polarity_of",
    "print_constraint",
    "print_expr",
    "print_problem",
    "read_conic",
    "read_solution",
    "read_trace",
    "reduce_problem",
    "sample_feasible",
    "sign_of",
    "trivial_graph_impl",
    "verify_trace_sampled",
    "write_conic",
    "write_solution",
    "write_trace",
]
