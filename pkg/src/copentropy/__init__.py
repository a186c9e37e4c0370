"""Copula entropy estimation and the dependence analyses and tests built on it."""

from .analysis import (
    DependenceTree,
    LagProfile,
    SelectionRanking,
    SystemRelevance,
    chow_liu_tree,
    estimate_time_lag,
    identify_system,
    select_variables,
)
from .copulas import CopulaModel, copula_density, fit_copula, parametric_ce
from .core import (
    CEResult,
    DependenceMatrix,
    ce_matrix,
    conditional_mi,
    copula_entropy,
    transfer_entropy,
    vector_association,
)
from .dataset import Dataset, PseudoObservations, TiePolicy, load_csv, pseudo_observations
from .errors import CopEntropyError
from .knn import EntropyConfig, ksg_entropy
from .stattests import (
    TestReport,
    copula_gof_test,
    multi_change_point,
    mvn_test,
    permutation_pvalue,
    single_change_point,
    symmetry_test,
    two_sample_test,
)

__version__ = "0.1.0"

__all__ = [
    "CEResult",
    "CopEntropyError",
    "CopulaModel",
    "Dataset",
    "DependenceMatrix",
    "DependenceTree",
    "EntropyConfig",
    "LagProfile",
    "PseudoObservations",
    "SelectionRanking",
    "SystemRelevance",
    "TestReport",
    "TiePolicy",
    "ce_matrix",
    "chow_liu_tree",
    "conditional_mi",
    "copula_density",
    "copula_entropy",
    "copula_gof_test",
    "estimate_time_lag",
    "fit_copula",
    "identify_system",
    "ksg_entropy",
    "load_csv",
    "multi_change_point",
    "mvn_test",
    "parametric_ce",
    "permutation_pvalue",
    "pseudo_observations",
    "select_variables",
    "single_change_point",
    "symmetry_test",
    "transfer_entropy",
    "two_sample_test",
    "vector_association",
]
