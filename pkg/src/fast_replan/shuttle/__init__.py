from .params import (
	PARAMETER_NAMES,
	STATE_NAMES,
	ShuttleParams,
	ShuttleState,
	initial_state,
)
from .dynamics import shuttle_dynamics, shuttle_jac_u, shuttle_jac_x
from .problem import ShuttleConfig, shuttle_problem

__all__ = [
	# 参数与状态
	"PARAMETER_NAMES",
	"STATE_NAMES",
	"ShuttleParams",
	"ShuttleState",
	"initial_state",
	# 动力学
	"shuttle_dynamics",
	"shuttle_jac_u",
	"shuttle_jac_x",
	# 问题
	"ShuttleConfig",
	"shuttle_problem",
]
