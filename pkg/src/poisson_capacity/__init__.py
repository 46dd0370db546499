"""Capacity of the discrete-time Poisson channel under a peak amplitude constraint."""

__version__ = "0.1.0"

from .bounds import (
    Inapplicable,
    InapplicableBound,
    binary_capacity,
    binary_closed_form,
    binary_threshold,
    bounds_report,
)
from .channel import Truncation, log_pmf, truncation_index
from .detection import detection_report, equivocation, error_probability, map_decode
from .dist import DiscreteDistribution, OutputModel, build_model
from .information import info_density, mutual_information, psi_sequence, sign_changes
from .solver import SolverConfig, SolverResult, kkt_verify, solve_capacity, sweep
from .special import WBranch, lambert_w, log_factorial

__all__ = [
    "DiscreteDistribution",
    "Inapplicable",
    "InapplicableBound",
    "OutputModel",
    "SolverConfig",
    "SolverResult",
    "Truncation",
    "WBranch",
    "binary_capacity",
    "binary_closed_form",
    "binary_threshold",
    "bounds_report",
    "build_model",
    "detection_report",
    "equivocation",
    "error_probability",
    "info_density",
    "kkt_verify",
    "lambert_w",
    "log_factorial",
    "log_pmf",
    "map_decode",
    "mutual_information",
    "psi_sequence",
    "sign_changes",
    "solve_capacity",
    "sweep",
    "truncation_index",
]
