"""Cyclic relational causal discovery with separation oracles.

Build relational causal models over entity-relationship schemas, unroll them
into (possibly cyclic) ground graphs and sigma-abstract ground graphs, answer
d- and sigma-separation queries, learn partially oriented dependency graphs
with an RCD-style constraint algorithm, and score possible-ancestor and
possible-cycle recall against the true model.
"""

from .agg import (
    AggNode,
    IntersectionVar,
    SigmaAgg,
    build_sigma_agg,
    check_relational_acyclification_assumption,
    max_acyclification_hop,
    relational_acyclify,
)
from .digraph import (
    DiGraph,
    acyclify,
    ancestors,
    d_separated,
    descendants,
    enumerate_independence_model,
    scc,
    sigma_separated,
    sigma_separated_by_paths,
)
from .discovery import RCD, SeparationOracle, learn_skeleton, orient_edges, rcd
from .experiments import ExperimentConfig, ExperimentRecord, export_results, run_grid
from .model import (
    GroundGraph,
    Link,
    RelationalModel,
    Skeleton,
    cycle_stats,
    ground_graph,
    random_model,
    random_skeleton,
)
from .pag import Dpag, compute_recall, is_possible_ancestor, is_possible_cycle
from .paths import (
    RelationalDependency,
    RelationalVariable,
    all_relational_variables,
    extend_path,
    is_valid_path,
    terminal_set,
)
from .schema import Cardinality, Schema, make_schema, random_schema, validate_schema

__all__ = [
    "AggNode",
    "Cardinality",
    "DiGraph",
    "Dpag",
    "ExperimentConfig",
    "ExperimentRecord",
    "GroundGraph",
    "IntersectionVar",
    "Link",
    "RCD",
    "RelationalDependency",
    "RelationalModel",
    "RelationalVariable",
    "Schema",
    "SeparationOracle",
    "SigmaAgg",
    "Skeleton",
    "acyclify",
    "all_relational_variables",
    "ancestors",
    "build_sigma_agg",
    "check_relational_acyclification_assumption",
    "compute_recall",
    "cycle_stats",
    "d_separated",
    "descendants",
    "enumerate_independence_model",
    "export_results",
    "extend_path",
    "ground_graph",
    "is_possible_ancestor",
    "is_possible_cycle",
    "is_valid_path",
    "learn_skeleton",
    "make_schema",
    "max_acyclification_hop",
    "orient_edges",
    "random_model",
    "random_schema",
    "random_skeleton",
    "rcd",
    "relational_acyclify",
    "run_grid",
    "scc",
    "sigma_separated",
    "sigma_separated_by_paths",
    "terminal_set",
    "validate_schema",
]

__version__ = "0.1.0"
