"""pydlnn - critical points of regularized deep linear networks."""

from pydlnn.bounds import BoundsReport, compute_bounds
from pydlnn.config import ExperimentConfig, SolverOptions
from pydlnn.experiment import ExperimentRunner, run_experiment
from pydlnn.network import Architecture, TrainingInstance, build_gradient_system, sample_instance
from pydlnn.polynomial import Polynomial, PolySystem
from pydlnn.reduced import solve_reduced
from pydlnn.tracker import Solution, solution_counts, solve_total_degree

__version__ = "0.1.0"
__all__ = [
    "Architecture",
    "BoundsReport",
    "ExperimentConfig",
    "ExperimentRunner",
    "PolySystem",
    "Polynomial",
    "Solution",
    "SolverOptions",
    "TrainingInstance",
    "build_gradient_system",
    "compute_bounds",
    "run_experiment",
    "sample_instance",
    "solution_counts",
    "solve_reduced",
    "solve_total_degree",
]
