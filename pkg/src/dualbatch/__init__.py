"""Dual robust control of batch diafiltration.

Parameterized minimum-time policies, set-membership estimation, and
nominal, adaptive and dual closed-loop controllers with a Monte-Carlo
harness.
"""

from .controllers import BatchResult, ControllerConfig, run_algorithm1
from .estimation import Estimator, GammaBox, ParamBox, ParamPolytope
from .harness import ExperimentSpec, monte_carlo, run_closed_loop, summarize
from .model import GammaParams, PlantConfig, ProcessState
from .policy import FeedbackRule, Policy, solve_nominal

__version__ = "0.1.0"

__all__ = [
    "BatchResult", "ControllerConfig", "Estimator", "ExperimentSpec", "FeedbackRule",
    "GammaBox", "GammaParams", "ParamBox", "ParamPolytope", "PlantConfig", "Policy",
    "ProcessState", "monte_carlo", "run_algorithm1", "run_closed_loop", "solve_nominal",
    "summarize",
]
