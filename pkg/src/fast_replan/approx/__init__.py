from .taylor import linear_approx, theta_step
from .grid import (
	GridBuildSettings,
	JacobianGrid,
	NodeOutcome,
	build_jacobian_grid,
	grid_coordinates,
	interpolate,
	ring_order,
)
from .providers import (
	DirectJacobianProvider,
	GridJacobianProvider,
	IJacobianProvider,
	JacobianProviderFactory,
	JacobianSource,
)
from .homotopy import HomotopyConfig, HomotopyTrace, homotopy_approx, homotopy_path, make_provider
from .storage import FORMAT_VERSION, decode_grid, encode_grid, load_grid, save_grid

__all__ = [
	# Taylor 近似
	"linear_approx",
	"theta_step",
	# 灵敏度网格
	"GridBuildSettings",
	"JacobianGrid",
	"NodeOutcome",
	"build_jacobian_grid",
	"grid_coordinates",
	"interpolate",
	"ring_order",
	# 灵敏度来源
	"DirectJacobianProvider",
	"GridJacobianProvider",
	"IJacobianProvider",
	"JacobianProviderFactory",
	"JacobianSource",
	# 同伦
	"HomotopyConfig",
	"HomotopyTrace",
	"homotopy_approx",
	"homotopy_path",
	"make_provider",
	# 持久化
	"FORMAT_VERSION",
	"decode_grid",
	"encode_grid",
	"load_grid",
	"save_grid",
]
