import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from fast_replan.errors import DimensionTooLarge, EmptyImportantSet, NonPositiveTrace, ShapeMismatch
from fast_replan.gsa import (
    MAX_SOBOL_DIM,
    ScreeningReport,
    dgsm_estimate,
    qmc_samples,
    screen,
    sobol_constant,
    sobol_upper_bound,
    trace_covariance,
)
from fast_replan.hdsa import SensitivityMatrix


def test_qmc_samples_are_deterministic_and_in_the_box() -> None:
    points = qmc_samples(21, 200)

    assert points.shape == (200, 21)
    assert np.all(points >= -1.0) and np.all(points <= 1.0)
    np.testing.assert_array_equal(points[0], -1.0)
    np.testing.assert_array_equal(points, qmc_samples(21, 200))
    np.testing.assert_array_equal(points[:64], qmc_samples(21, 64))


def test_qmc_samples_reject_bad_sizes() -> None:
    with pytest.raises(DimensionTooLarge):
        qmc_samples(MAX_SOBOL_DIM + 1, 4)
    with pytest.raises(ValueError):
        qmc_samples(0, 4)


def test_dgsm_and_trace_on_known_samples() -> None:
    d_samples = [np.array([[1.0, 0.0], [1.0, 2.0]]), SensitivityMatrix(d=[[3.0, 0.0], [1.0, 0.0]], theta_at=[0.0, 0.0])]
    np.testing.assert_allclose(dgsm_estimate(d_samples), [(2.0 + 10.0) / 2, 4.0 / 2])

    u_samples = [np.array([0.0, 1.0]), np.array([2.0, 1.0]), np.array([4.0, 1.0])]
    assert trace_covariance(u_samples) == pytest.approx(4.0)

    with pytest.raises(ShapeMismatch):
        dgsm_estimate([np.zeros((2, 2)), np.zeros((3, 2))])
    with pytest.raises(ValueError):
        trace_covariance([np.zeros(2)])


def test_bound_to_dgsm_ratio_is_constant() -> None:
    dgsm = np.array([0.5, 2.0, 0.0, 7.5])
    bounds = sobol_upper_bound(dgsm, 3.0)

    np.testing.assert_allclose(bounds[dgsm > 0] / dgsm[dgsm > 0], sobol_constant() / 3.0)
    assert sobol_constant() == pytest.approx(4.0 / np.pi ** 2)
    assert bounds[2] == 0.0

    with pytest.raises(NonPositiveTrace):
        sobol_upper_bound(dgsm, 0.0)


def test_bound_dominates_total_index_for_linear_maps() -> None:
    rng = np.random.default_rng(3)
    thetas = qmc_samples(3, 256)

    for _ in range(100):
        a = rng.normal(size=(5, 3))
        u_samples = [a @ theta for theta in thetas]
        bounds = sobol_upper_bound(dgsm_estimate([a]), trace_covariance(u_samples))
        # u* = A·θ 为加性模型，S_j^tot = Σ_i A_ij² / Σ_ij A_ij²
        total = np.sum(a ** 2, axis=0) / np.sum(a ** 2)
        assert np.all(bounds >= total)


def test_screen_orders_and_selects_important_parameters() -> None:
    report = screen([0.1, 2.0, 0.5, 2.0], 1.0, threshold=0.1, parameter_names=["m", "rho0", "s", "cl"], samples_used=8)

    assert report.ordering == [1, 3, 2, 0]
    assert report.important == [1, 2, 3]
    assert report.important_names == ["rho0", "s", "cl"]
    assert report.require_important() == [1, 2, 3]
    assert report.table().splitlines()[2].startswith("rho0")

    restored = ScreeningReport.from_json(report.to_json())
    np.testing.assert_array_equal(restored.bounds, report.bounds)
    assert restored.important == report.important
    assert restored.parameter_names == report.parameter_names


def test_screen_edge_cases() -> None:
    quiet = screen([0.01, 0.02], 1.0, threshold=0.1)
    assert quiet.parameter_names == ["theta0", "theta1"]
    with pytest.raises(EmptyImportantSet):
        quiet.require_important()

    with pytest.raises(NonPositiveTrace):
        screen([0.1], 0.0)
    with pytest.raises(ValueError):
        ScreeningReport(
            parameter_names=["a"],
            dgsm=[1.0],
            bounds=[1.0],
            trace_gamma=1.0,
            important=[],
            ordering=[0],
            threshold=0.1,
            samples_used=2,
        )


def test_qmc_samples_are_centred_and_stratified() -> None:
    points = qmc_samples(21, 256)

    assert np.all(np.abs(points.mean(axis=0)) < 0.02)
    for j in range(points.shape[1]):
        strata = np.sort(np.floor((points[:, j] + 1.0) * 128.0).astype(int))
        np.testing.assert_array_equal(strata, np.arange(256))

    cells = np.floor((points[:, :2] + 1.0) * 8.0).astype(int)
    assert len({(int(a), int(b)) for a, b in cells}) == 256
