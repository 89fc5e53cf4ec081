"""Probabilistic forwarding of coded packets on network graphs.

A source floods n coded packets; every other vertex retransmits each
packet it first receives with probability p, and decodes once it has any
k of the n. The package simulates that protocol on standard graph
families and cross-checks the simulations against closed-form tree
analysis and percolation-based large-grid limits: minimum forwarding
probabilities for near-broadcast, and the expected transmission cost of
operating there.
"""

__version__ = "0.1.0"

from .binom import (
    binom_cdf,
    binom_cdf_kl_bound,
    binom_tail,
    kl_bern,
    sandwich_check,
    std_normal_cdf,
)
from .errors import GraphGenerationError, NoSolutionError
from .estimator import (
    CurvePoint,
    McEstimate,
    PminEstimate,
    exact_small_graph,
    mc_expected_fraction,
    mc_pmin,
    mc_tau,
    sweep_n,
    write_curve_csv,
)
from .graphs import (
    Graph,
    build_from_edges,
    build_grid,
    build_random_regular,
    build_rgg,
    build_tree,
    write_edge_list,
)
from .gridlimit import (
    GapResult,
    GridLimitSpec,
    GridPmin,
    GridTau,
    extended_coverage_tail,
    finite_grid_pmin_gap,
    grid_pmin,
    grid_tau_normalized,
    limit_receiver_fraction,
    limit_receiver_fraction_double_sum,
    two_stage_tail,
)
from .percolation import (
    PercField,
    ThetaTable,
    build_theta_table,
    conditioned_origin_density,
    default_p_grid,
    estimate_theta,
    estimate_theta_plus,
    extended_cluster,
    label_clusters,
    sample_field,
    theta_cache_filename,
)
from .protocol import (
    ThresholdField,
    TrialOutcome,
    run_single_packet,
    run_trial,
    run_trial_coupled,
    run_trials,
)
from .trees import (
    TreeSpec,
    tree_expected_receivers,
    tree_expected_transmissions,
    tree_pmin,
    tree_pmin_bounds_kl,
    tree_pmin_lower_bound,
    tree_pmin_upper_bound,
    tree_tau,
)

__all__ = [
    "__version__",
    "binom_cdf",
    "binom_tail",
    "binom_cdf_kl_bound",
    "kl_bern",
    "std_normal_cdf",
    "sandwich_check",
    "NoSolutionError",
    "GraphGenerationError",
    "Graph",
    "build_from_edges",
    "build_grid",
    "build_tree",
    "build_rgg",
    "build_random_regular",
    "write_edge_list",
    "ThresholdField",
    "TrialOutcome",
    "run_single_packet",
    "run_trial",
    "run_trials",
    "run_trial_coupled",
    "PercField",
    "ThetaTable",
    "sample_field",
    "label_clusters",
    "extended_cluster",
    "estimate_theta",
    "estimate_theta_plus",
    "conditioned_origin_density",
    "default_p_grid",
    "build_theta_table",
    "theta_cache_filename",
    "McEstimate",
    "PminEstimate",
    "CurvePoint",
    "mc_expected_fraction",
    "mc_tau",
    "mc_pmin",
    "exact_small_graph",
    "sweep_n",
    "write_curve_csv",
    "TreeSpec",
    "tree_expected_receivers",
    "tree_expected_transmissions",
    "tree_pmin",
    "tree_tau",
    "tree_pmin_lower_bound",
    "tree_pmin_upper_bound",
    "tree_pmin_bounds_kl",
    "GridLimitSpec",
    "GridPmin",
    "GridTau",
    "GapResult",
    "two_stage_tail",
    "extended_coverage_tail",
    "limit_receiver_fraction",
    "limit_receiver_fraction_double_sum",
    "grid_pmin",
    "grid_tau_normalized",
    "finite_grid_pmin_gap",
]
