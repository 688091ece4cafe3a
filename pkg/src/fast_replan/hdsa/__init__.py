from .sensitivity import (
	HdsaSettings,
	SensitivityMatrix,
	compute_sensitivity,
	hessian,
	mixed_partials,
	sensitivity_matrix,
)

__all__ = [
	"HdsaSettings",
	"SensitivityMatrix",
	"compute_sensitivity",
	"hessian",
	"mixed_partials",
	"sensitivity_matrix",
]
