import numpy as np
import pytest

from squidmag.optimize import covariance_from_jacobian, levenberg_marquardt


class TestLevenbergMarquardt:
    def test_linear_problem_exact(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((20, 3))
        x_true = np.array([1.5, -2.0, 0.5])
        y = a @ x_true

        res = levenberg_marquardt(lambda x: a @ x - y, np.zeros(3))
        assert res.converged
        assert np.allclose(res.x, x_true, rtol=1e-10)
        assert res.cost < 1e-18

    def test_rosenbrock_valley(self):
        def residual(x):
            return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

        res = levenberg_marquardt(residual, np.array([-1.2, 1.0]), x_scale=np.ones(2))
        assert res.converged
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-8)

    def test_exponential_fit_round_trip(self):
        t = np.linspace(0.0, 3.0, 40)
        truth = np.array([2.0, 1.3, 0.4])
        y = truth[0] * np.exp(-truth[1] * t) + truth[2]

        def residual(x):
            return x[0] * np.exp(-x[1] * t) + x[2] - y

        res = levenberg_marquardt(residual, np.array([1.0, 1.0, 0.0]),
                                  x_scale=np.ones(3))
        assert res.converged
        assert np.allclose(res.x, truth, rtol=1e-8)

    def test_bounds_pin_parameter(self):
        # unconstrained optimum at x = 2, box caps it at 1
        res = levenberg_marquardt(
            lambda x: x - 2.0,
            np.array([0.5]),
            bounds=(np.array([0.0]), np.array([1.0])),
            x_scale=np.ones(1),
        )
        assert res.converged
        assert res.x[0] == pytest.approx(1.0)
        assert res.at_upper[0]
        assert res.pinned[0]

    def test_fixed_parameters_stay_put(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((10, 2))
        y = a @ np.array([1.0, 3.0])

        res = levenberg_marquardt(
            lambda x: a @ x - y,
            np.array([0.7, 0.0]),
            free=np.array([False, True]),
            x_scale=np.ones(2),
        )
        assert res.x[0] == 0.7
        assert res.converged

    def test_nan_regions_are_avoided(self):
        # residual undefined for x > 1.5; optimum at x = 1
        def residual(x):
            if x[0] > 1.5:
                return np.array([np.nan])
            return np.array([x[0] - 1.0])

        res = levenberg_marquardt(residual, np.array([0.2]), x_scale=np.ones(1))
        assert res.converged
        assert res.x[0] == pytest.approx(1.0, abs=1e-8)

    def test_nonfinite_start_rejected(self):
        with pytest.raises(ValueError):
            levenberg_marquardt(lambda x: np.array([np.nan]), np.array([1.0]))

    def test_iteration_cap_reported(self):
        def residual(x):
            return np.array([np.exp(-x[0]) ])  # cost decreases forever

        res = levenberg_marquardt(residual, np.array([0.0]), max_iter=3,
                                  x_scale=np.ones(1))
        assert not res.converged
        assert res.n_iter == 3


class TestCovariance:
    def test_linear_regression_matches_textbook(self):
        rng = np.random.default_rng(5)
        n = 200
        t = np.linspace(0, 1, n)
        a = np.column_stack([np.ones(n), t])
        sigma = 0.3
        y = a @ np.array([1.0, 2.0]) + sigma * rng.standard_normal(n)

        res = levenberg_marquardt(lambda x: a @ x - y, np.zeros(2), x_scale=np.ones(2))
        cov = covariance_from_jacobian(res.jacobian, res.residual)
        s2 = res.cost / (n - 2)
        expected = s2 * np.linalg.inv(a.T @ a)
        assert np.allclose(cov, expected, rtol=1e-6)
