from .controller import CONTROL_BOUNDS, Controller, hat_basis_eval
from .theta import ThetaVector, dimensionalize, dimensionalize_array, nondimensionalize
from .objective import IObjective
from .cost import (
	cost,
	cost_gradient,
	freeze_scales,
	terminal_residuals,
	trajectory_cost,
	trajectory_cost_gradient,
)
from .problem import ProblemSpec, StateBound, TerminalTarget

__all__ = [
	# 控制器
	"CONTROL_BOUNDS",
	"Controller",
	"hat_basis_eval",
	# 参数
	"ThetaVector",
	"dimensionalize",
	"dimensionalize_array",
	"nondimensionalize",
	# 问题定义
	"IObjective",
	"ProblemSpec",
	"StateBound",
	"TerminalTarget",
	# 代价
	"cost",
	"cost_gradient",
	"freeze_scales",
	"terminal_residuals",
	"trajectory_cost",
	"trajectory_cost_gradient",
]
