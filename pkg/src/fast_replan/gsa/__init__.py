from .sampling import MAX_SOBOL_DIM, qmc_samples
from .dgsm import dgsm_estimate, sobol_constant, sobol_upper_bound, trace_covariance
from .screening import ScreeningReport, screen

__all__ = [
	# 采样
	"MAX_SOBOL_DIM",
	"qmc_samples",
	# 估计
	"dgsm_estimate",
	"sobol_constant",
	"sobol_upper_bound",
	"trace_covariance",
	# 筛选
	"ScreeningReport",
	"screen",
]
