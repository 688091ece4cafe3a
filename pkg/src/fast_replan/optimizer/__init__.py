from .config import OptimizerConfig, OptimReport
from .bfgs import minimize, minimize_objective, projected_gradient

__all__ = [
	"OptimizerConfig",
	"OptimReport",
	"minimize",
	"minimize_objective",
	"projected_gradient",
]
