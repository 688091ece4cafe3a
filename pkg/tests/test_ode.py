import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from fast_replan.errors import NonFiniteState
from fast_replan.ocp import Controller
from fast_replan.ode import (
    TimeGrid,
    Trajectory,
    count_evaluations,
    integrate,
    integrate_with_sensitivities,
)


def _decay(t, x, u, p):
    return -p * x


def test_time_grid_nodes_and_lookup() -> None:
    grid = TimeGrid(t_final=4000.0, n_steps=400)

    assert grid.n_nodes == 401
    assert grid.step == pytest.approx(10.0)
    assert grid.first_node_at_or_after(2000.0) == 200
    assert grid.first_node_at_or_after(1995.0) == 200
    assert grid.first_node_at_or_after(0.0) == 0
    assert grid.first_node_at_or_after(4000.0) == 400

    sub = grid.sub_grid(200)
    assert sub.t0 == pytest.approx(2000.0)
    assert sub.n_steps == 200
    assert sub.step == pytest.approx(grid.step)

    with pytest.raises(ValueError):
        TimeGrid(t_final=1.0, n_steps=0)
    with pytest.raises(ValueError):
        grid.sub_grid(400)


def test_rk4_is_fourth_order_on_exponential_decay() -> None:
    errors = []
    for n in (10, 20, 40):
        grid = TimeGrid(t_final=1.0, n_steps=n)
        controller = Controller.constant(TimeGrid(t_final=1.0, n_steps=1), 0.0)
        trajectory = integrate(_decay, np.array([1.0]), grid, controller, 2.0)
        errors.append(abs(trajectory.final_state[0] - np.exp(-2.0)))

    assert errors[0] / errors[1] > 12.0
    assert errors[1] / errors[2] > 12.0


def test_integrate_uses_piecewise_linear_control_exactly() -> None:
    controller = Controller(grid=TimeGrid(t_final=1.0, n_steps=1), coeffs=[0.0, 1.0])
    grid = TimeGrid(t_final=1.0, n_steps=4)

    trajectory = integrate(lambda t, x, u, p: np.array([u]), np.zeros(1), grid, controller, None)

    np.testing.assert_allclose(trajectory.states[:, 0], 0.5 * grid.nodes ** 2, atol=1e-14)


def test_sensitivities_match_finite_differences() -> None:
    def f(t, x, u, p):
        return np.array([-p * x[0] + np.sin(u), x[0] * u])

    def jac_x(t, x, u, p):
        return np.array([[-p, 0.0], [u, 0.0]])

    def jac_u(t, x, u, p):
        return np.array([np.cos(u), x[0]])

    ctrl_grid = TimeGrid(t_final=2.0, n_steps=4)
    grid = TimeGrid(t_final=2.0, n_steps=40)
    coeffs = np.array([0.1, -0.3, 0.5, 0.2, 0.0])
    x0 = np.array([1.0, 0.0])
    controller = Controller(grid=ctrl_grid, coeffs=coeffs)

    trajectory = integrate_with_sensitivities(f, jac_x, jac_u, x0, grid, controller, 0.7)

    eps = 1e-6
    fd = np.empty((2, coeffs.size))
    for j in range(coeffs.size):
        e = np.zeros_like(coeffs)
        e[j] = eps
        plus = integrate(f, x0, grid, controller.with_coeffs(coeffs + e), 0.7).final_state
        minus = integrate(f, x0, grid, controller.with_coeffs(coeffs - e), 0.7).final_state
        fd[:, j] = (plus - minus) / (2 * eps)

    assert trajectory.sens.shape == (grid.n_nodes, 2, coeffs.size)
    np.testing.assert_allclose(trajectory.sens[0], 0.0)
    np.testing.assert_allclose(trajectory.sens[-1], fd, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(
        trajectory.states, integrate(f, x0, grid, controller, 0.7).states, rtol=0, atol=1e-14
    )


def test_non_finite_state_is_reported() -> None:
    def blows_up(t, x, u, p):
        return np.array([np.nan]) if t > 0.5 else np.array([1.0])

    controller = Controller.constant(TimeGrid(t_final=1.0, n_steps=1), 0.0)
    with pytest.raises(NonFiniteState):
        integrate(blows_up, np.zeros(1), TimeGrid(t_final=1.0, n_steps=10), controller, None)


def test_controller_grid_must_span_integration_grid() -> None:
    controller = Controller.constant(TimeGrid(t_final=1.0, n_steps=1), 0.0)
    with pytest.raises(ValueError):
        integrate(_decay, np.ones(1), TimeGrid(t_final=2.0, n_steps=4), controller, 1.0)


def test_evaluation_counter_scopes_nest() -> None:
    controller = Controller.constant(TimeGrid(t_final=1.0, n_steps=1), 0.0)
    grid = TimeGrid(t_final=1.0, n_steps=10)

    with count_evaluations() as outer:
        integrate(_decay, np.ones(1), grid, controller, 1.0)
        with count_evaluations() as inner:
            integrate(_decay, np.ones(1), grid, controller, 1.0)

    assert inner.integrations == 1
    assert inner.dynamics_calls == 40
    assert outer.integrations == 2
    assert outer.dynamics_calls == 80
    assert outer.cost_evaluations == 0


def test_trajectory_join_shares_boundary_node() -> None:
    grid = TimeGrid(t_final=2.0, n_steps=4)
    head = Trajectory(grid=grid.sub_grid(0, 2), states=[[0.0], [1.0], [2.0]])
    tail = Trajectory(grid=grid.sub_grid(2), states=[[2.0], [3.0], [4.0]])

    joined = head.join(tail, grid)

    np.testing.assert_array_equal(joined.states[:, 0], [0.0, 1.0, 2.0, 3.0, 4.0])
    assert joined.final_state[0] == 4.0
    with pytest.raises(ValueError):
        Trajectory(grid=grid, states=np.zeros((3, 1)))
