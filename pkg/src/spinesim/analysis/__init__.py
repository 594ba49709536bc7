"""Sampling, statistics and identity checks."""
from .checks import (NestedBudgetError, check_feynman_kac, check_forks, check_many_to_one,
                     check_whole_tree, integrated_division_rate)
from .functionals import TimeWeight, get_functional
from .sampling import (ExtinctionError, check_sampling_convergence, division_count,
                       sample_uniform_lineage, surviving_tree)
from .stats import (EmpiricalDistribution, MCEstimate, VerificationReport, bootstrap_ks,
                    ks_two_sample, poisson_chisquare, z_score)

__all__ = [
    "EmpiricalDistribution", "ExtinctionError", "MCEstimate", "NestedBudgetError",
    "TimeWeight", "VerificationReport", "bootstrap_ks", "check_feynman_kac", "check_forks",
    "check_many_to_one", "check_sampling_convergence", "check_whole_tree", "division_count",
    "get_functional", "integrated_division_rate", "ks_two_sample", "poisson_chisquare",
    "sample_uniform_lineage", "surviving_tree", "z_score",
]
