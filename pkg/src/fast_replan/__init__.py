from .errors import ReplanError
from .ode import TimeGrid, Trajectory, count_evaluations, integrate, integrate_with_sensitivities
from .ocp import Controller, IObjective, ProblemSpec, ThetaVector
from .optimizer import OptimizerConfig, OptimReport, minimize
from .hdsa import HdsaSettings, SensitivityMatrix, compute_sensitivity
from .gsa import ScreeningReport, screen
from .approx import JacobianGrid, homotopy_approx, interpolate, linear_approx, load_grid, save_grid
from .shuttle import ShuttleConfig, shuttle_problem
from .pipeline import ExperimentConfig, load_config

__all__ = [
	"ReplanError",
	"TimeGrid",
	"Trajectory",
	"count_evaluations",
	"integrate",
	"integrate_with_sensitivities",
	"Controller",
	"IObjective",
	"ProblemSpec",
	"ThetaVector",
	"OptimizerConfig",
	"OptimReport",
	"minimize",
	"HdsaSettings",
	"SensitivityMatrix",
	"compute_sensitivity",
	"ScreeningReport",
	"screen",
	"JacobianGrid",
	"homotopy_approx",
	"interpolate",
	"linear_approx",
	"load_grid",
	"save_grid",
	"ShuttleConfig",
	"shuttle_problem",
	"ExperimentConfig",
	"load_config",
]
