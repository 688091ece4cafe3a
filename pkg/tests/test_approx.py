import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from conftest import SineTracking, make_toy_spec
from fast_replan.errors import ConfigError, MissingCorner, NodeSolveFailure, NonFiniteState, OutOfGridBounds, ShapeMismatch
from fast_replan.approx import (
    DirectJacobianProvider,
    GridBuildSettings,
    GridJacobianProvider,
    HomotopyConfig,
    IJacobianProvider,
    JacobianGrid,
    JacobianProviderFactory,
    JacobianSource,
    build_jacobian_grid,
    grid_coordinates,
    homotopy_approx,
    homotopy_path,
    interpolate,
    linear_approx,
    make_provider,
    ring_order,
    theta_step,
)
from fast_replan.hdsa import SensitivityMatrix, compute_sensitivity
from fast_replan.ocp import Controller, IObjective
from fast_replan.ode import TimeGrid, count_evaluations
from fast_replan.optimizer import OptimizerConfig, minimize_objective


class _FixedProvider(IJacobianProvider):
    def __init__(self, d: SensitivityMatrix):
        self.d = d
        self.calls = 0

    def jacobian(self, coeffs, theta):
        self.calls += 1
        return self.d


class _FailsAbove(IObjective):
    """包装玩具问题，θ_0 超过 limit 时积分发散"""

    def __init__(self, inner, limit: float):
        self.inner = inner
        self.limit = limit

    @property
    def n_coeffs(self) -> int:
        return self.inner.n_coeffs

    @property
    def n_params(self) -> int:
        return self.inner.n_params

    def _check(self, theta) -> None:
        if theta[0] > self.limit:
            raise NonFiniteState(f"theta {theta[0]} beyond {self.limit}")

    def evaluate(self, coeffs, theta) -> float:
        self._check(theta)
        return self.inner.evaluate(coeffs, theta)

    def gradient(self, coeffs, theta):
        self._check(theta)
        return self.inner.gradient(coeffs, theta)


def _bilinear_grid():
    # 每个矩阵元素都是 x、y 的双线性函数，多线性插值应当精确
    xs, ys = grid_coordinates(3), grid_coordinates(4)
    c = np.arange(24, dtype=float).reshape(4, 3, 2) / 10.0
    payload = np.empty((3, 4, 3, 2))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            payload[i, j] = c[0] + c[1] * x + c[2] * y + c[3] * x * y
    return JacobianGrid(
        dims=[0, 2],
        node_coords=[xs, ys],
        payload=payload,
        missing=np.zeros((3, 4), dtype=bool),
        nominal_u=Controller(grid=TimeGrid(t_final=2.0, n_steps=2), coeffs=[0.1, 0.2, 0.3]),
        meta={"beta0": 0.1},
    ), c


def _toy_nominal():
    spec = make_toy_spec()
    report = minimize_objective(
        spec, np.zeros(2), Controller.constant(spec.controller_grid, 0.0), OptimizerConfig(grad_tol=1e-9)
    )
    return spec, report.controller


def test_grid_coordinates_and_ring_order() -> None:
    np.testing.assert_allclose(grid_coordinates(5), [-1.0, -0.5, 0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        grid_coordinates(1)

    rings = ring_order((3, 3))
    assert rings[0] == [4]
    assert sorted(rings[1]) == [0, 1, 2, 3, 5, 6, 7, 8]
    assert ring_order((2, 2)) == [[0, 1, 2, 3]]
    assert ring_order((5,)) == [[2], [1, 3], [0, 4]]


def test_multilinear_interpolation_is_exact_for_bilinear_payload() -> None:
    grid, c = _bilinear_grid()
    rng = np.random.default_rng(11)

    for _ in range(25):
        x, y = rng.uniform(-1.0, 1.0, 2)
        expected = c[0] + c[1] * x + c[2] * y + c[3] * x * y
        sens = interpolate(grid, [x, y])
        np.testing.assert_allclose(sens.d, expected, atol=1e-12)
        assert sens.columns == [0, 2]

    for index in np.ndindex(*grid.shape):
        np.testing.assert_allclose(interpolate(grid, grid.node_theta(index)).d, grid.payload[index], atol=1e-14)


def test_interpolation_errors() -> None:
    grid, _ = _bilinear_grid()

    with pytest.raises(OutOfGridBounds):
        interpolate(grid, [1.5, 0.0])
    with pytest.raises(OutOfGridBounds):
        interpolate(grid, [np.nan, 0.0])
    with pytest.raises(ShapeMismatch):
        interpolate(grid, [0.0, 0.0, 0.0])

    payload = grid.payload.copy()
    payload[0, 0] = np.nan
    missing = np.zeros((3, 4), dtype=bool)
    missing[0, 0] = True
    holed = JacobianGrid(
        dims=grid.dims,
        node_coords=grid.node_coords,
        payload=payload,
        missing=missing,
        nominal_u=grid.nominal_u,
    )

    assert holed.unusable_cells() == 1
    with pytest.raises(MissingCorner):
        interpolate(holed, [-0.5, -0.9])
    with pytest.raises(MissingCorner):
        holed.stored((0, 0))
    # 缺失角点权重为 0 时不报错
    np.testing.assert_allclose(interpolate(holed, grid.node_theta((1, 1))).d, grid.payload[1, 1], atol=1e-14)


def test_grid_rejects_inconsistent_payload() -> None:
    grid, _ = _bilinear_grid()
    with pytest.raises(ValueError):
        JacobianGrid(
            dims=[0, 2],
            node_coords=grid.node_coords,
            payload=np.zeros((3, 4, 2, 2)),
            missing=grid.missing,
            nominal_u=grid.nominal_u,
        )
    with pytest.raises(ValueError):
        JacobianGrid(
            dims=[0],
            node_coords=[[-1.0, 0.5]],
            payload=np.zeros((2, 3, 1)),
            missing=np.zeros(2, dtype=bool),
            nominal_u=grid.nominal_u,
        )


def test_build_grid_on_toy_problem() -> None:
    spec, u_star = _toy_nominal()
    outcomes = []

    grid = build_jacobian_grid(spec, [0], 3, nominal_u=u_star, on_node=outcomes.append, meta={"beta0": 0.1})

    assert grid.dims == [0]
    assert grid.shape == (3,)
    assert not grid.missing.any()
    np.testing.assert_allclose(grid.payload[..., 0], 0.02, atol=1e-6)
    assert [o.flat_index for o in outcomes] == [1, 0, 2]
    assert [o.ring for o in outcomes] == [0, 1, 1]
    assert outcomes[0].warm_start is None
    assert outcomes[1].warm_start == 1 and outcomes[2].warm_start == 1
    assert grid.meta["beta0"] == 0.1
    assert grid.meta["failed_nodes"] == []

    sens = interpolate(grid, [0.25])
    np.testing.assert_allclose(sens.d, 0.02, atol=1e-6)


def test_build_grid_marks_failed_nodes_missing() -> None:
    spec, u_star = _toy_nominal()
    outcomes = []

    grid = build_jacobian_grid(_FailsAbove(spec, 0.5), [0], 3, nominal_u=u_star, on_node=outcomes.append)

    np.testing.assert_array_equal(grid.missing, [False, False, True])
    assert grid.meta["failed_nodes"] == [2]
    assert outcomes[-1].status == "failed"
    assert "NonFiniteState" in outcomes[-1].message
    np.testing.assert_allclose(interpolate(grid, [-0.5]).d, 0.02, atol=1e-6)
    with pytest.raises(MissingCorner):
        interpolate(grid, [0.5])

    with pytest.raises(NodeSolveFailure):
        build_jacobian_grid(_FailsAbove(spec, -2.0), [0], 3, nominal_u=u_star)


def test_build_grid_with_parallel_workers_matches_sequential() -> None:
    spec, u_star = _toy_nominal()

    sequential = build_jacobian_grid(spec, [0], 3, nominal_u=u_star)
    parallel = build_jacobian_grid(spec, [0], 3, GridBuildSettings(workers=2), nominal_u=u_star)

    np.testing.assert_array_equal(sequential.payload, parallel.payload)


def test_linear_approx_applies_step_and_clips() -> None:
    u = Controller(grid=TimeGrid(t_final=1.0, n_steps=1), coeffs=[0.2, 1.5])
    d = SensitivityMatrix(d=[[1.0, 0.0], [1.0, 0.0]], theta_at=[0.0, 0.0])

    result = linear_approx(u, d, [0.0, 0.0], [0.5, 0.3])

    np.testing.assert_allclose(result.coeffs, [0.7, np.pi / 2])
    with pytest.raises(ShapeMismatch):
        linear_approx(u, d, [0.0, 0.0], [0.5])

    reduced = SensitivityMatrix(d=[[2.0], [0.0]], theta_at=[0.0], columns=[2])
    np.testing.assert_allclose(theta_step(reduced, np.zeros(3), [0.1, 0.2, 0.3]), [0.3])
    np.testing.assert_allclose(linear_approx(u, reduced, np.zeros(3), [0.1, 0.2, 0.3]).coeffs, [0.8, 1.5])


def test_single_step_homotopy_matches_linear_approx() -> None:
    rng = np.random.default_rng(5)
    grid = TimeGrid(t_final=1.0, n_steps=3)

    for _ in range(50):
        u = Controller(grid=grid, coeffs=rng.uniform(-1.0, 1.0, 4))
        d = SensitivityMatrix(d=rng.normal(size=(4, 3)), theta_at=np.zeros(3))
        theta0, theta1 = rng.uniform(-1.0, 1.0, (2, 3))

        expected = linear_approx(u, d, theta0, theta1)
        result = homotopy_approx(u, theta0, theta1, HomotopyConfig(steps=1), _FixedProvider(d))

        np.testing.assert_array_equal(result.coeffs, expected.coeffs)


def test_homotopy_error_decreases_at_first_order() -> None:
    objective = SineTracking(n_coeffs=2)
    provider = DirectJacobianProvider(objective)
    u0 = Controller(grid=TimeGrid(t_final=1.0, n_steps=1), coeffs=[0.0, 0.0])
    steps = np.array([1, 2, 4, 8, 16])

    errors = []
    for m in steps:
        u = homotopy_approx(u0, [0.0], [1.0], HomotopyConfig(steps=int(m), source=JacobianSource.DIRECT), provider)
        errors.append(np.max(np.abs(u.coeffs - np.sin(1.0))))

    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert -1.3 <= slope <= -0.7
    assert all(b < a for a, b in zip(errors, errors[1:]))


def test_homotopy_path_records_iterates_and_costs() -> None:
    objective = SineTracking(n_coeffs=2)
    provider = _FixedProvider(SensitivityMatrix(d=[[1.0], [1.0]], theta_at=[0.0]))
    u0 = Controller(grid=TimeGrid(t_final=1.0, n_steps=1), coeffs=[0.0, 0.0])

    trace = homotopy_path(u0, [0.0], [0.8], HomotopyConfig(steps=4, reintegrate=True), provider, objective)

    assert provider.calls == 4
    assert trace.times == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert len(trace.iterates) == 5
    assert len(trace.costs) == 5
    assert trace.costs[0] == 0.0
    np.testing.assert_allclose(trace.controller.coeffs, 0.8)

    quiet = homotopy_path(u0, [0.0], [0.8], HomotopyConfig(steps=4), provider, objective)
    assert quiet.costs is None


def test_grid_provider_is_evaluation_free() -> None:
    grid, c = _bilinear_grid()
    provider = GridJacobianProvider(grid)

    with count_evaluations() as counter:
        sens = provider.jacobian(grid.nominal_u.coeffs, np.array([0.5, 0.9, -0.5]))
        homotopy_approx(grid.nominal_u, np.zeros(3), [0.5, 0.0, -0.5], HomotopyConfig(steps=8), provider)

    assert counter.total == 0
    np.testing.assert_allclose(sens.d, c[0] + 0.5 * c[1] - 0.5 * c[2] - 0.25 * c[3], atol=1e-12)


def test_provider_factory() -> None:
    grid, _ = _bilinear_grid()

    assert isinstance(JacobianProviderFactory.create(JacobianSource.GRID, grid=grid), GridJacobianProvider)
    direct = JacobianProviderFactory.create("direct", objective=SineTracking())
    assert isinstance(direct, DirectJacobianProvider)

    JacobianProviderFactory.register_provider_cls("fixed", _FixedProvider)
    try:
        assert JacobianProviderFactory.get_provider_cls("fixed") is _FixedProvider
    finally:
        JacobianProviderFactory._mapping.pop("fixed")
    with pytest.raises(ValueError):
        JacobianProviderFactory.get_provider_cls("fixed")


def test_grid_centre_node_matches_nominal_sensitivity() -> None:
    spec, u_star = _toy_nominal()

    grid = build_jacobian_grid(spec, [0], 3, nominal_u=u_star)
    direct = compute_sensitivity(u_star, np.zeros(2), spec, columns=[0])

    np.testing.assert_allclose(grid.payload[1], direct.d, atol=1e-8)


def test_homotopy_with_constant_jacobian_is_step_count_invariant() -> None:
    d = SensitivityMatrix(d=[[0.2, -0.1], [0.05, 0.3], [-0.15, 0.1]], theta_at=[0.0, 0.0])
    u0 = Controller(grid=TimeGrid(t_final=1.0, n_steps=2), coeffs=[0.1, -0.2, 0.3])
    theta0, theta1 = [0.1, -0.4], [0.7, 0.5]

    expected = linear_approx(u0, d, theta0, theta1).coeffs
    for m in (1, 2, 4, 8, 16):
        result = homotopy_approx(u0, theta0, theta1, HomotopyConfig(steps=m), _FixedProvider(d))
        np.testing.assert_allclose(result.coeffs, expected, atol=1e-12)


def test_homotopy_builds_provider_from_source() -> None:
    grid, c = _bilinear_grid()
    theta1 = [0.5, 0.0, -0.5]

    by_source = homotopy_approx(grid.nominal_u, np.zeros(3), theta1, HomotopyConfig(steps=8), grid=grid)
    explicit = homotopy_approx(grid.nominal_u, np.zeros(3), theta1, HomotopyConfig(steps=8), GridJacobianProvider(grid))
    np.testing.assert_array_equal(by_source.coeffs, explicit.coeffs)

    objective = SineTracking(n_coeffs=2)
    u0 = Controller(grid=TimeGrid(t_final=1.0, n_steps=1), coeffs=[0.0, 0.0])
    direct_cfg = HomotopyConfig(steps=4, source=JacobianSource.DIRECT)
    assert isinstance(make_provider(direct_cfg, objective=objective), DirectJacobianProvider)
    np.testing.assert_array_equal(
        homotopy_approx(u0, [0.0], [1.0], direct_cfg, objective=objective).coeffs,
        homotopy_approx(u0, [0.0], [1.0], direct_cfg, DirectJacobianProvider(objective)).coeffs,
    )

    with pytest.raises(ConfigError):
        homotopy_approx(grid.nominal_u, np.zeros(3), theta1, HomotopyConfig(steps=2))
    with pytest.raises(ConfigError):
        make_provider(direct_cfg)
