import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from fast_replan.ocp import IObjective, ProblemSpec, TerminalTarget
from fast_replan.ode import TimeGrid


def pytest_configure(config) -> None:
    config.addinivalue_line("markers", "slow: full-horizon shuttle runs (set FAST_REPLAN_SLOW=1)")


def pytest_collection_modifyitems(config, items) -> None:
    if os.environ.get("FAST_REPLAN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set FAST_REPLAN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


# ===== 解析目标函数 =====

class ShiftedQuadratic(IObjective):
    """J = ½‖u - a·θ_0‖²，最优点 u* = a·θ_0，D 的第 0 列为 a，其余列为 0"""

    def __init__(self, a, n_params: int = 2):
        self.a = np.asarray(a, dtype=float)
        self._n_params = n_params

    @property
    def n_coeffs(self) -> int:
        return self.a.size

    @property
    def n_params(self) -> int:
        return self._n_params

    def evaluate(self, coeffs, theta) -> float:
        r = np.asarray(coeffs) - self.a * theta[0]
        return 0.5 * float(r @ r)

    def gradient(self, coeffs, theta):
        return np.asarray(coeffs) - self.a * theta[0]


class SineTracking(IObjective):
    """J = ½Σ(u_i - sin θ_0)²，最优映射 u*(θ) = sin θ_0 是弯曲的"""

    def __init__(self, n_coeffs: int = 2):
        self._n_coeffs = n_coeffs

    @property
    def n_coeffs(self) -> int:
        return self._n_coeffs

    @property
    def n_params(self) -> int:
        return 1

    def evaluate(self, coeffs, theta) -> float:
        r = np.asarray(coeffs) - np.sin(theta[0])
        return 0.5 * float(r @ r)

    def gradient(self, coeffs, theta):
        return np.asarray(coeffs) - np.sin(theta[0])


# ===== 帽函数积分的玩具最优控制问题 =====
#
# x_i' = φ_i(t)·(u(t) - p0)（i = 0..3），x_4' = 0
# x_i(T) = (M(c - p0))_i，M 为帽函数质量矩阵；终端目标 τ = M·0.1 使 u* = p0 + 0.1。
# p0 = 0.2·(1 + 0.1·θ_0)，p1 不进入动力学，因此 D[:, 0] = 0.02，D[:, 1] = 0。

TOY_CONTROLLER_GRID = TimeGrid(t_final=3.0, n_steps=3)
TOY_INTEGRATION_GRID = TimeGrid(t_final=3.0, n_steps=6)
TOY_TARGETS = np.array([0.05, 0.1, 0.1, 0.05])
TOY_EYE = np.eye(TOY_CONTROLLER_GRID.n_nodes)


def _toy_weights(t: float) -> np.ndarray:
    nodes = TOY_CONTROLLER_GRID.nodes
    return np.array([np.interp(t, nodes, TOY_EYE[j]) for j in range(nodes.size)])


def toy_dynamics(t, x, u, p):
    return np.concatenate([_toy_weights(t) * (u - p[0]), [0.0]])


def toy_jac_x(t, x, u, p):
    return np.zeros((5, 5))


def toy_jac_u(t, x, u, p):
    return np.concatenate([_toy_weights(t), [0.0]])


def make_toy_spec() -> ProblemSpec:
    return ProblemSpec(
        dynamics=toy_dynamics,
        jac_x=toy_jac_x,
        jac_u=toy_jac_u,
        x0=[0.0, 0.0, 0.0, 0.0, 1.0],
        integration_grid=TOY_INTEGRATION_GRID,
        controller_grid=TOY_CONTROLLER_GRID,
        nominal_params=[0.2, 1.0],
        param_names=("p0", "p1"),
        beta0=0.1,
        objective_index=4,
        terminal=[TerminalTarget(index=i, target=t, weight=1.0) for i, t in enumerate(TOY_TARGETS)],
        scales=np.ones(5),
    )


@pytest.fixture
def toy_spec() -> ProblemSpec:
    return make_toy_spec()
