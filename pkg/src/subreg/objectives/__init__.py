"""Benchmark objective families, property checkers and instance files."""

from .base import CallableObjective, DomainError, MeanObjective, Objective, linear_objective
from .checks import (
    CheckReport,
    check_beta_smooth,
    check_concave_along_nonneg,
    check_dr_submodular,
    check_weak_dr_inequality,
)
from .coverage import SURROGATE_RATIO, CoverageObjective, coverage_generate
from .dopt import DEFAULT_RIDGE, DOptObjective, dopt_generate
from .nqp import NqpObjective, nqp_generate

FAMILIES = ("coverage", "nqp", "dopt")

__all__ = [
    "CallableObjective", "CheckReport", "CoverageObjective", "DEFAULT_RIDGE", "DOptObjective",
    "DomainError", "FAMILIES", "MeanObjective", "NqpObjective", "Objective", "SURROGATE_RATIO",
    "check_beta_smooth", "check_concave_along_nonneg", "check_dr_submodular",
    "check_weak_dr_inequality", "coverage_generate", "dopt_generate", "linear_objective",
    "nqp_generate",
]
