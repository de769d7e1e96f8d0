"""Exact Gaussian-process regression (the dense O(n^3) baseline).

Everything here works on the full covariance matrix: training costs a dense
Cholesky per likelihood evaluation, so this model is the accuracy yardstick
for modest n rather than a large-data tool.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .data import Dataset
from .errors import InvalidInputError
from .kernel import KernelParams, chol_with_jitter, default_params, kernel_matrix
from .optimize import OptimizerSettings, maximize, perturbed_starts

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class FullGpModel:
    """Fitted exact GP: hyperparameters plus cached training factorization."""

    params: KernelParams
    X: np.ndarray
    y: np.ndarray
    factor: np.ndarray          # lower Cholesky of K + noise*I
    alpha: np.ndarray           # (K + noise*I)^{-1} y
    log_likelihood: float = np.nan
    n_iter: int = 0
    converged: bool = True
    degenerate: bool = False    # single training point: lengthscales unidentifiable
    message: str = ""

    def predict(self, x_star, include_noise=False):
        return predict_full_gp(self, x_star, include_noise=include_noise)


def _noisy_cov(params: KernelParams, X: np.ndarray):
    """Covariance of the observations: kernel + jitter + noise on the diagonal."""
    K = kernel_matrix(params, X)
    K[np.diag_indices_from(K)] += params.noise_variance
    return K


def log_marginal_likelihood(params: KernelParams, data: Dataset):
    """Exact log marginal likelihood and its gradient in log-parameter space.

    Returns
    -------
    (value, grad) where ``grad`` follows the packing of
    :meth:`KernelParams.to_log_vector`: ``[log sf2, log l_1..d, log noise]``.
    """
    X, y = data.X, data.y
    if X.shape[1] != params.n_dims:
        raise InvalidInputError(
            f"data has {X.shape[1]} dims but params have {params.n_dims}")
    n = X.shape[0]
    Ky = _noisy_cov(params, X)
    L, _ = chol_with_jitter(Ky, params.signal_variance)
    alpha = cho_solve((L, True), y)
    value = (-0.5 * float(y @ alpha)
             - float(np.sum(np.log(np.diag(L))))
             - 0.5 * n * LOG_2PI)

    # d(lml) = 0.5 tr((alpha alpha^T - Ky^{-1}) dKy)
    Ky_inv = cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - Ky_inv
    K_pure = Ky.copy()
    K_pure[np.diag_indices_from(K_pure)] -= params.noise_variance + params.jitter

    grad = np.empty(params.n_dims + 2)
    grad[0] = 0.5 * float(np.sum(W * K_pure))
    for k in range(params.n_dims):
        diff = X[:, k, None] - X[None, :, k]
        grad[1 + k] = 0.5 * float(
            np.sum(W * K_pure * (diff * diff) / params.lengthscales[k] ** 2))
    grad[-1] = 0.5 * params.noise_variance * float(np.trace(W))
    return value, grad


def build_full_gp(params: KernelParams, data: Dataset) -> FullGpModel:
    """Assemble a model at fixed hyperparameters (no optimization)."""
    Ky = _noisy_cov(params, data.X)
    L, _ = chol_with_jitter(Ky, params.signal_variance)
    alpha = cho_solve((L, True), data.y)
    value = (-0.5 * float(data.y @ alpha)
             - float(np.sum(np.log(np.diag(L))))
             - 0.5 * data.n * LOG_2PI)
    return FullGpModel(params=params, X=data.X, y=data.y, factor=L, alpha=alpha,
                       log_likelihood=value, degenerate=data.n == 1)


def fit_full_gp(data: Dataset, init: KernelParams = None,
                settings: OptimizerSettings = None) -> FullGpModel:
    """Maximize the marginal likelihood over log hyperparameters.

    Multi-start quasi-Newton ascent; the best finite iterate across all
    starts wins.  A run that never produces a finite likelihood is reported
    through ``converged=False`` with the initialization returned.
    """
    if init is None:
        init = default_params(data.X, data.y)
    if settings is None:
        settings = OptimizerSettings(max_iter=200)
    if data.X.shape[1] != init.n_dims:
        raise InvalidInputError(
            f"data has {data.X.shape[1]} dims but init has {init.n_dims}")
    jitter = init.jitter

    def value_and_grad(theta):
        params = KernelParams.from_log_vector(theta, jitter=jitter)
        return log_marginal_likelihood(params, data)

    best = None
    total_iter = 0
    for x0 in perturbed_starts(init.to_log_vector(), settings):
        res = maximize(value_and_grad, x0, settings)
        total_iter += res.n_iter
        if best is None or res.value > best.value:
            best = res

    params = KernelParams.from_log_vector(best.x, jitter=jitter)
    model = build_full_gp(params, data)
    model.n_iter = total_iter
    model.converged = best.converged and np.isfinite(best.value)
    model.message = best.message
    model.degenerate = data.n == 1
    return model


def predict_full_gp(model: FullGpModel, x_star, include_noise=False):
    """Posterior mean and variance at one point or a batch of points.

    Accepts a single point of shape (d,) or a batch (q, d); returns floats
    for the former, arrays for the latter.  Variance is for the latent
    function unless ``include_noise`` adds the observation noise.
    """
    x_star = np.asarray(x_star, dtype=float)
    single = x_star.ndim == 1
    Xq = x_star[None, :] if single else x_star
    if Xq.ndim != 2 or Xq.shape[1] != model.params.n_dims:
        raise InvalidInputError(
            f"query must have dimension {model.params.n_dims}, got shape {x_star.shape}")
    ks = kernel_matrix(model.params, model.X, Xq)
    mean = ks.T @ model.alpha
    v = solve_triangular(model.factor, ks, lower=True)
    var = model.params.signal_variance - np.sum(v * v, axis=0)
    np.maximum(var, 0.0, out=var)
    if include_noise:
        var = var + model.params.noise_variance
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
