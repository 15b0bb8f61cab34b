"""Capacitated vehicle routing on trees: exact oracles, heuristics and a configuration DP."""

from .baselines import exact_config_dp, exact_partition_dp, greedy, itp
from .bounds import lb_edge, lb_radial, tree_tsp_cost
from .decomposition import check_decomposition, decompose
from .model import (
    BudgetExceeded,
    EmptyInstanceError,
    Instance,
    InstanceFormatError,
    Solution,
    Tour,
    normalize,
    read_instance,
    read_solution,
    verify,
    write_instance,
    write_solution,
)
from .ptas_dp import PtasParams, run_ptas, solve_ptas
from .splittable import contract_solution, expand
from .transforms import build_hat_tree, lift_solution, solve_banded, split_by_distance

__version__ = "0.1.0"
