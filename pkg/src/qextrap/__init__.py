"""Extrapolation of timed quantum measurement statistics under energy constraints."""

from qextrap.quantum import (
    Average,
    Dataset,
    Hard,
    NoisyDataset,
    Realization,
    Scenario,
    Soft,
    fit_check,
    simulate_dataset,
    simulate_timeline,
    validate_realization,
)
from qextrap.relaxations import RelaxationSpec, build_model, gap_bounds
from qextrap.extrapolation import (
    ExtrapolationProblem,
    Interval,
    certainty_scan,
    knightian_inner_check,
    selftest_diagnostics,
    solve_interval,
)

__version__ = "0.1.0"

__all__ = [
    "Average",
    "Dataset",
    "ExtrapolationProblem",
    "Hard",
    "Interval",
    "NoisyDataset",
    "Realization",
    "RelaxationSpec",
    "Scenario",
    "Soft",
    "build_model",
    "certainty_scan",
    "fit_check",
    "gap_bounds",
    "knightian_inner_check",
    "selftest_diagnostics",
    "simulate_dataset",
    "simulate_timeline",
    "solve_interval",
    "validate_realization",
]
