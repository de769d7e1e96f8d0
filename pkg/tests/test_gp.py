"""Exact-GP baseline tests.

The dense-algebra oracles here avoid the library's own Cholesky plumbing
(plain ``np.linalg.solve`` / ``slogdet``) so the two routes are independent.
"""

import math

import numpy as np
import pytest

from splk import (
    Dataset,
    KernelParams,
    OptimizerSettings,
    build_full_gp,
    fit_full_gp,
    gen_gp_sample,
    kernel_matrix,
    log_marginal_likelihood,
    predict_full_gp,
)

LOG_2PI = math.log(2.0 * math.pi)


def _toy_params(d=1, noise=0.1, jitter=None, sf2=1.0, ell=1.0):
    kw = {} if jitter is None else {"jitter": jitter}
    return KernelParams(signal_variance=sf2, lengthscales=[ell] * d,
                        noise_variance=noise, **kw)


def _dense_lml(params, X, y):
    """Independent likelihood evaluation: no Cholesky, no shared helpers."""
    K = kernel_matrix(params, X)
    K[np.diag_indices_from(K)] += params.noise_variance
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return -0.5 * y @ np.linalg.solve(K, y) - 0.5 * logdet - 0.5 * len(y) * LOG_2PI


# ---------------------------------------------------------------------------
# Prediction


def test_noiseless_interpolation():
    """With zero noise the posterior mean passes through the data.

    Well-separated inputs keep the Gram matrix benign; the only deviation
    from exact interpolation is the tiny stabilizing jitter.
    """
    X = np.linspace(0, 5, 12)[:, None]
    y = np.sin(X[:, 0])
    model = build_full_gp(_toy_params(noise=0.0, jitter=1e-12, ell=0.5),
                          Dataset(X=X, y=y))
    mean, var = predict_full_gp(model, X)
    np.testing.assert_allclose(mean, y, atol=1e-8)
    assert np.all(var < 1e-6)


def test_prior_reversion_far_from_data():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, size=(15, 2))
    y = rng.standard_normal(15)
    params = _toy_params(d=2, sf2=2.0)
    model = build_full_gp(params, Dataset(X=X, y=y))
    mean, var = predict_full_gp(model, np.array([500.0, 500.0]))
    assert abs(mean) < 1e-10
    assert var == pytest.approx(2.0, abs=1e-10)


def test_two_point_system_matches_hand_inversion():
    """Hand-solved 2x2 system: explicit inverse, scalar arithmetic only."""
    sf2, ell, noise = 1.0, 1.0, 0.5
    x1, x2, xs = 0.0, 1.0, 0.25
    y = np.array([1.0, -2.0])
    k12 = sf2 * math.exp(-0.5 * (x1 - x2) ** 2 / ell ** 2)
    a = sf2 + noise
    det = a * a - k12 * k12
    # (K + noise I)^{-1} y by Cramer's rule
    alpha = np.array([(a * y[0] - k12 * y[1]) / det,
                      (-k12 * y[0] + a * y[1]) / det])
    ks = np.array([sf2 * math.exp(-0.5 * (x1 - xs) ** 2),
                   sf2 * math.exp(-0.5 * (x2 - xs) ** 2)])
    mean_hand = ks @ alpha
    quad = (a * ks[0] ** 2 - 2 * k12 * ks[0] * ks[1] + a * ks[1] ** 2) / det
    var_hand = sf2 - quad

    params = KernelParams(signal_variance=sf2, lengthscales=[ell],
                          noise_variance=noise, jitter=0.0)
    model = build_full_gp(params, Dataset(X=[[x1], [x2]], y=y))
    mean, var = predict_full_gp(model, np.array([xs]))
    assert mean == pytest.approx(mean_hand, rel=1e-12)
    assert var == pytest.approx(var_hand, rel=1e-12)


def test_mean_is_linear_in_targets():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 3, size=(25, 2))
    y = rng.standard_normal(25)
    params = _toy_params(d=2)
    m1 = build_full_gp(params, Dataset(X=X, y=y))
    m2 = build_full_gp(params, Dataset(X=X, y=2.0 * y))
    Xq = rng.uniform(0, 3, size=(10, 2))
    mean1, var1 = predict_full_gp(m1, Xq)
    mean2, var2 = predict_full_gp(m2, Xq)
    np.testing.assert_allclose(mean2, 2.0 * mean1, rtol=1e-10)
    np.testing.assert_allclose(var2, var1, rtol=1e-12)  # variance ignores y


def test_variance_bounded_by_prior():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 10, size=(50, 1))
    y = rng.standard_normal(50)
    params = _toy_params(sf2=1.6)
    model = build_full_gp(params, Dataset(X=X, y=y))
    Xq = rng.uniform(-5, 15, size=(200, 1))
    _, var = predict_full_gp(model, Xq)
    assert np.all(var >= 0.0)
    assert np.all(var <= 1.6 + 1e-10)


def test_more_data_never_raises_noiseless_variance():
    rng = np.random.default_rng(4)
    X = rng.uniform(0, 4, size=(6, 1))
    y = rng.standard_normal(6)
    params = _toy_params(noise=0.0, jitter=1e-12)
    small = build_full_gp(params, Dataset(X=X[:5], y=y[:5]))
    large = build_full_gp(params, Dataset(X=X, y=y))
    Xq = np.linspace(-1, 5, 40)[:, None]
    _, var_small = predict_full_gp(small, Xq)
    _, var_large = predict_full_gp(large, Xq)
    assert np.all(var_large <= var_small + 1e-9)


def test_memorization_control():
    """Leakage sanity check: near-zero noise, test equals train, MSE ~ 0."""
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 5, size=(40, 2))
    y = np.cos(X[:, 0]) + 0.5 * X[:, 1]
    model = build_full_gp(_toy_params(d=2, noise=1e-10, jitter=1e-12),
                          Dataset(X=X, y=y))
    mean, _ = predict_full_gp(model, X)
    assert np.mean((mean - y) ** 2) < 1e-6


def test_include_noise_flag_shifts_variance():
    rng = np.random.default_rng(6)
    X = rng.uniform(0, 2, size=(10, 1))
    y = rng.standard_normal(10)
    model = build_full_gp(_toy_params(noise=0.25), Dataset(X=X, y=y))
    _, lat = predict_full_gp(model, X[:3])
    _, obs = predict_full_gp(model, X[:3], include_noise=True)
    np.testing.assert_allclose(obs - lat, 0.25, rtol=1e-12)


# ---------------------------------------------------------------------------
# Likelihood and gradient


def test_likelihood_matches_dense_oracle():
    rng = np.random.default_rng(7)
    X = rng.uniform(0, 5, size=(30, 2))
    y = rng.standard_normal(30)
    params = KernelParams(signal_variance=1.3, lengthscales=[0.8, 2.0],
                          noise_variance=0.2, jitter=0.0)
    value, _ = log_marginal_likelihood(params, Dataset(X=X, y=y))
    assert value == pytest.approx(_dense_lml(params, X, y), rel=1e-10)


def test_build_records_same_likelihood():
    rng = np.random.default_rng(8)
    X = rng.uniform(0, 5, size=(20, 1))
    y = rng.standard_normal(20)
    params = _toy_params(jitter=0.0)
    model = build_full_gp(params, Dataset(X=X, y=y))
    value, _ = log_marginal_likelihood(params, Dataset(X=X, y=y))
    assert model.log_likelihood == pytest.approx(value, rel=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(9)
    X = rng.uniform(0, 4, size=(25, 2))
    y = np.sin(X[:, 0]) + rng.normal(scale=0.3, size=25)
    data = Dataset(X=X, y=y)
    params = KernelParams(signal_variance=1.4, lengthscales=[0.9, 1.7],
                          noise_variance=0.15)
    theta0 = params.to_log_vector()
    _, grad = log_marginal_likelihood(params, data)
    h = 1e-6
    for i in range(len(theta0)):
        tp, tm = theta0.copy(), theta0.copy()
        tp[i] += h
        tm[i] -= h
        fp, _ = log_marginal_likelihood(
            KernelParams.from_log_vector(tp, jitter=params.jitter), data)
        fm, _ = log_marginal_likelihood(
            KernelParams.from_log_vector(tm, jitter=params.jitter), data)
        fd = (fp - fm) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


# ---------------------------------------------------------------------------
# Fitting


def test_fit_recovers_known_hyperparameters():
    """Refit data drawn from a known GP; log-hyperparameters land within
    +-0.5 of the generating values."""
    truth = KernelParams(signal_variance=1.0, lengthscales=[0.5],
                         noise_variance=0.01)
    data = gen_gp_sample(200, 1, truth, seed=42)
    model = fit_full_gp(data)
    assert model.converged
    err = model.params.to_log_vector() - truth.to_log_vector()
    assert np.all(np.abs(err) < 0.5), f"log-parameter error {err}"


def test_fit_improves_on_init():
    rng = np.random.default_rng(10)
    X = rng.uniform(0, 5, size=(60, 1))
    y = np.sin(2.0 * X[:, 0]) + rng.normal(scale=0.1, size=60)
    data = Dataset(X=X, y=y)
    init = _toy_params()
    v0, _ = log_marginal_likelihood(init, data)
    model = fit_full_gp(data, init=init,
                        settings=OptimizerSettings(max_iter=100, restarts=1))
    assert model.log_likelihood >= v0 - 1e-9


def test_single_point_fit_is_flagged_degenerate():
    model = fit_full_gp(Dataset(X=[[0.0]], y=[1.0]),
                        settings=OptimizerSettings(max_iter=20, restarts=1))
    assert model.degenerate
    mean, var = predict_full_gp(model, np.array([0.0]))
    assert np.isfinite(mean) and var >= 0.0


def test_fixed_params_build_is_deterministic():
    rng = np.random.default_rng(11)
    X = rng.uniform(0, 5, size=(15, 1))
    y = rng.standard_normal(15)
    a = build_full_gp(_toy_params(), Dataset(X=X, y=y))
    b = build_full_gp(_toy_params(), Dataset(X=X, y=y))
    np.testing.assert_array_equal(a.alpha, b.alpha)
    assert a.log_likelihood == b.log_likelihood
