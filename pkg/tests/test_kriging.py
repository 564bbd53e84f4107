import numpy as np
import pytest

from mbo_epbii.core.config import LikelihoodGAConfig
from mbo_epbii.core.exceptions import InputDomainError
from mbo_epbii.services.kriging import (LIKELIHOOD_UNDEFINED, correlation, correlation_matrix, fit,
                                        fit_models, log_likelihood, predict, predict_all, predict_batch,
                                        validation_rmse)


# theta >= 10 keeps the correlation matrices well conditioned for oracle comparisons
WELL_CONDITIONED = LikelihoodGAConfig(population_size=8, generations=3, log10_theta_lower=1.0)


def _toy(rng, n=15, m=2):
    X = rng.random((n, m))
    y = np.sin(3.0 * X[:, 0]) + X[:, 1] ** 2
    return X, y


def _dense_likelihood(theta, X, y, nugget=1e-10):
    n = X.shape[0]
    R = np.array([[correlation(a, b, theta) for b in X] for a in X]) + nugget * np.eye(n)
    Rinv = np.linalg.inv(R)
    ones = np.ones(n)
    mu = ones @ Rinv @ y / (ones @ Rinv @ ones)
    r = y - mu
    sigma2 = r @ Rinv @ r / n
    _, logdet = np.linalg.slogdet(R)
    return -0.5 * (n * np.log(sigma2) + logdet)


def test_correlation_matrix_matches_pairwise(rng):
    X = rng.random((5, 3))
    theta = np.array([0.5, 2.0, 10.0])
    R = correlation_matrix(X, X, theta)
    np.testing.assert_allclose(np.diag(R), 1.0)
    assert R[1, 3] == pytest.approx(correlation(X[1], X[3], theta), rel=1e-12)


def test_log_likelihood_matches_dense_oracle(rng):
    for _ in range(20):
        X = rng.random((10, 2))
        y = rng.standard_normal(10)
        theta = 10.0 ** rng.uniform(0.7, 1.7, size=2)
        assert log_likelihood(theta, X, y) == pytest.approx(_dense_likelihood(theta, X, y), rel=1e-8, abs=1e-8)


def test_constant_outputs_give_undefined_likelihood(rng):
    X = rng.random((6, 2))
    assert log_likelihood(np.ones(2), X, np.full(6, 3.0)) == LIKELIHOOD_UNDEFINED


def test_predictor_matches_dense_oracle(rng):
    X, y = _toy(rng)
    model = fit(X, y, WELL_CONDITIONED)
    Xt = rng.random((8, 2))
    mean, var = predict_batch(model, Xt)

    n = model.n_samples
    R = correlation_matrix(model.X, model.X, model.theta) + model.nugget * np.eye(n)
    Rinv = np.linalg.inv(R)
    ones = np.ones(n)
    r = correlation_matrix(model.scale_inputs(Xt), model.X, model.theta)
    mean_oracle = model.mu_hat + r @ Rinv @ (model.y - model.mu_hat)
    var_oracle = model.sigma2_hat * (1.0 - np.sum((r @ Rinv) * r, axis=1)
                                     + (1.0 - r @ Rinv @ ones) ** 2 / (ones @ Rinv @ ones))
    np.testing.assert_allclose(mean, model.y_mean + model.y_std * mean_oracle, rtol=1e-8, atol=1e-10)
    np.testing.assert_allclose(var, model.y_std ** 2 * np.maximum(var_oracle, 0.0), rtol=1e-6, atol=1e-10)


def test_interpolates_training_data(rng):
    X, y = _toy(rng)
    model = fit(X, y, WELL_CONDITIONED)
    mean, var = predict_batch(model, X)
    np.testing.assert_allclose(mean, y, atol=1e-5)
    assert np.all(var <= 1e-6)
    m0, v0 = predict(model, X[0])
    assert m0 == pytest.approx(y[0], abs=1e-5)
    assert v0 >= 0.0


def test_fit_is_deterministic(rng, fast_likelihood_ga):
    X, y = _toy(rng)
    a = fit(X, y, fast_likelihood_ga)
    b = fit(X, y, fast_likelihood_ga)
    np.testing.assert_array_equal(a.theta, b.theta)
    assert np.all(a.theta >= 1e-3) and np.all(a.theta <= 1e3)


def test_constant_outputs_give_flat_model(rng, fast_likelihood_ga):
    X = rng.random((6, 2))
    model = fit(X, np.full(6, 2.5), fast_likelihood_ga)
    mean, var = predict_batch(model, rng.random((3, 2)))
    np.testing.assert_allclose(mean, 2.5)
    np.testing.assert_allclose(var, 0.0)


def test_duplicate_inputs_keep_latest_observation(rng, caplog):
    X, y = _toy(rng, n=8)
    X = np.vstack([X, X[:1]])
    y = np.append(y, y[0] + 1.0)
    model = fit(X, y, WELL_CONDITIONED)
    assert model.n_samples == 8
    assert predict(model, X[0])[0] == pytest.approx(y[-1], abs=1e-5)
    assert "duplicate" in caplog.text


def test_fit_input_errors(fast_likelihood_ga):
    with pytest.raises(InputDomainError):
        fit(np.ones((3, 2)), np.arange(3.0), fast_likelihood_ga)
    with pytest.raises(InputDomainError):
        fit(np.zeros((3, 2)), np.arange(2.0), fast_likelihood_ga)
    with pytest.raises(InputDomainError):
        fit(np.array([[0.0, 0.0], [1.0, np.nan]]), np.arange(2.0), fast_likelihood_ga)


def test_fit_models_thread_pool_matches_serial(rng):
    cfg = LikelihoodGAConfig(population_size=6, generations=2, log10_theta_lower=1.0)
    X = rng.random((10, 3))
    F = np.column_stack([X.sum(axis=1), (X ** 2).sum(axis=1)])
    serial = fit_models(X, F, cfg, seeds=[1, 2], workers=1)
    pooled = fit_models(X, F, cfg, seeds=[1, 2], workers=2)
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.theta, b.theta)
    means, variances = predict_all(serial, X[:4])
    assert means.shape == variances.shape == (4, 2)
    assert validation_rmse(serial[0], X, F[:, 0]) < 1e-4
    assert set(serial[0].summary()) >= {"theta", "mu_hat", "sigma2_hat", "nugget"}


def test_affine_rescaling_of_outputs(rng):
    X, y = _toy(rng)
    base = fit(X, y, WELL_CONDITIONED)
    shifted = fit(X, 2.0 * y + 5.0, WELL_CONDITIONED)
    np.testing.assert_allclose(shifted.theta, base.theta, rtol=1e-9)
    Xt = rng.random((20, 2))
    mean, var = predict_batch(base, Xt)
    mean2, var2 = predict_batch(shifted, Xt)
    np.testing.assert_allclose(mean2, 2.0 * mean + 5.0, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(var2, 4.0 * var, rtol=1e-6, atol=1e-12)


def test_leave_one_out_beats_constant_mean():
    X = (np.arange(8) + 0.5)[:, None] / 8.0
    y = np.sin(2.0 * np.pi * X[:, 0])
    cfg = LikelihoodGAConfig(population_size=20, generations=10)
    kriging_errors, constant_errors = [], []
    for i in range(8):
        keep = np.arange(8) != i
        model = fit(X[keep], y[keep], cfg, lower=np.zeros(1), upper=np.ones(1))
        kriging_errors.append(predict(model, X[i])[0] - y[i])
        constant_errors.append(y[keep].mean() - y[i])
    assert np.sqrt(np.mean(np.square(kriging_errors))) < np.sqrt(np.mean(np.square(constant_errors)))


def test_variance_is_never_negative(rng, fast_likelihood_ga):
    X, y = _toy(rng, n=20)
    model = fit(X, y, fast_likelihood_ga)
    _, var = predict_batch(model, rng.uniform(-0.2, 1.2, size=(1000, 2)))
    assert np.all(var >= 0.0)
