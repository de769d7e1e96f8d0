"""Sparse GP regression through optimized pseudo-inputs.

The dense training covariance is replaced by

    Delta = Q + diag(K - Q) + noise * I,      Q = K_nm K_m^{-1} K_mn,

where the m pseudo-inputs parameterizing ``Q`` are optimized jointly with
the kernel hyperparameters.  Equivalently the model is an exact GP under the
effective covariance ``Q(x, x') + delta(x, x') (k(x, x) - Q(x, x))``, which
is what makes the sparse and dense code paths directly comparable.

All products with ``Delta^{-1}`` go through the matrix-inversion lemma
(``Delta`` is diagonal plus rank m), giving O(n m^2) training iterations and
O(m^2) per-query predictions.  A dense reference path (`dense_delta`) is kept
for cross-checking the low-rank algebra at small n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .data import Dataset
from .errors import InvalidInputError, NumericalError
from .kernel import KernelParams, chol_with_jitter, default_params, kernel_matrix
from .optimize import OptimizerSettings, maximize

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Low-rank covariance


def low_rank_cov(params: KernelParams, X1, X2, pseudo) -> np.ndarray:
    """The rank-m covariance ``Q(X1, X2) = K_1m K_m^{-1} K_m2``.

    Coincides with the exact kernel matrix whenever the pseudo-inputs span
    the relevant function values (e.g. pseudo == X1 == X2).
    """
    pseudo = np.asarray(pseudo, dtype=float)
    K_m = kernel_matrix(params, pseudo)
    L_m, _ = chol_with_jitter(K_m, params.signal_variance)
    A1 = solve_triangular(L_m, kernel_matrix(params, pseudo, np.asarray(X1, float)), lower=True)
    A2 = solve_triangular(L_m, kernel_matrix(params, pseudo, np.asarray(X2, float)), lower=True)
    return A1.T @ A2


def dense_delta(params: KernelParams, pseudo, X) -> np.ndarray:
    """Dense reference assembly of ``Delta`` (O(n^2) memory; for checking)."""
    X = np.asarray(X, dtype=float)
    Q = low_rank_cov(params, X, X, pseudo)
    Q = 0.5 * (Q + Q.T)
    delta = Q.copy()
    idx = np.diag_indices_from(delta)
    delta[idx] += (params.signal_variance - Q[idx]) + params.noise_variance
    return delta


# ---------------------------------------------------------------------------
# Factorization shared by likelihood, gradient, and model building


class _Factors:
    """Low-rank factorization of Delta for fixed parameters and pseudo-inputs."""

    def __init__(self, params: KernelParams, pseudo: np.ndarray, X: np.ndarray):
        self.params = params
        self.pseudo = pseudo
        n = X.shape[0]
        self.K_nm = kernel_matrix(params, X, pseudo)              # (n, m) pure
        K_m_pure = kernel_matrix(params, pseudo, pseudo)
        K_m_pure = 0.5 * K_m_pure + 0.5 * K_m_pure.T  # halve first: no overflow
        self.K_m_pure = K_m_pure
        K_m = K_m_pure + params.jitter * np.eye(pseudo.shape[0])
        self.L_m, _ = chol_with_jitter(K_m, params.signal_variance)
        self.A = solve_triangular(self.L_m, self.K_nm.T, lower=True)   # (m, n)
        q_diag = np.sum(self.A * self.A, axis=0)
        self.q_diag = q_diag
        self.gamma = params.signal_variance - q_diag + params.noise_variance
        if np.any(self.gamma <= 0) or not np.all(np.isfinite(self.gamma)):
            raise NumericalError(
                f"nonpositive diagonal in Delta (min {np.min(self.gamma):.3g}); "
                "pseudo-input covariance exceeds the prior variance",
                params=params.to_log_vector())
        self.Ag = self.A / self.gamma[None, :]                          # (m, n)
        B = np.eye(pseudo.shape[0]) + self.Ag @ self.A.T
        B = 0.5 * (B + B.T)
        self.L_B, _ = chol_with_jitter(B, 1.0)
        self.logdet = float(np.sum(np.log(self.gamma))) \
            + 2.0 * float(np.sum(np.log(np.diag(self.L_B))))

    def solve(self, V):
        """Apply ``Delta^{-1}`` to a vector or matrix via the inversion lemma."""
        V = np.asarray(V, dtype=float)
        vec = V.ndim == 1
        Vm = V[:, None] if vec else V
        t = Vm / self.gamma[:, None]
        s = cho_solve((self.L_B, True), self.Ag @ Vm)
        out = t - (self.A.T @ s) / self.gamma[:, None]
        return out[:, 0] if vec else out


def spgp_log_marginal(params: KernelParams, pseudo, data: Dataset, with_grad=True):
    """Sparse-GP log marginal likelihood, optionally with its full gradient.

    Returns
    -------
    (value, grad)
        ``grad`` stacks ``[d/d log sf2, d/d log l_1..d, d/d log noise,
        d/d pseudo (row-major m*d)]``; it is ``None`` when ``with_grad`` is
        false.

    Raises
    ------
    NumericalError
        If the value or gradient comes out non-finite; the error carries the
        offending log-parameter vector.
    """
    X, y = data.X, data.y
    pseudo = np.asarray(pseudo, dtype=float)
    if pseudo.ndim != 2 or pseudo.shape[1] != X.shape[1]:
        raise InvalidInputError(
            f"pseudo-inputs must have shape (m, {X.shape[1]}), got {pseudo.shape}")
    if X.shape[1] != params.n_dims:
        raise InvalidInputError(
            f"data has {X.shape[1]} dims but params have {params.n_dims}")
    n, d = X.shape
    m = pseudo.shape[0]
    fac = _Factors(params, pseudo, X)
    alpha = fac.solve(y)
    value = -0.5 * float(y @ alpha) - 0.5 * fac.logdet - 0.5 * n * LOG_2PI
    if not np.isfinite(value):
        raise NumericalError("non-finite sparse likelihood",
                             params=np.concatenate([params.to_log_vector(), pseudo.ravel()]))
    if not with_grad:
        return value, None

    # dL = tr(E dDelta) with E = (alpha alpha^T - Delta^{-1}) / 2, and
    # dDelta = offdiag(dQ) + Diag(diag dK) + d(noise) I.  Everything below
    # assembles the chain products without forming any n x n matrix.
    V = solve_triangular(fac.L_B, fac.Ag, lower=True)            # Delta^{-1} = G^{-1} - V^T V
    diag_delta_inv = 1.0 / fac.gamma - np.sum(V * V, axis=0)
    diag_E = 0.5 * (alpha * alpha - diag_delta_inv)

    delta_inv_Knm = fac.K_nm / fac.gamma[:, None] - V.T @ (V @ fac.K_nm)
    E_Knm = 0.5 * (np.outer(alpha, alpha @ fac.K_nm) - delta_inv_Knm)
    Et_Knm = E_Knm - diag_E[:, None] * fac.K_nm                  # offdiag(E) K_nm

    bar_nm = 2.0 * cho_solve((fac.L_m, True), Et_Knm.T).T        # dL/dK_nm
    S_m = fac.K_nm.T @ Et_Knm
    S_m = 0.5 * (S_m + S_m.T)
    bar_m = -cho_solve((fac.L_m, True), cho_solve((fac.L_m, True), S_m).T)  # dL/dK_m
    tr_E = float(np.sum(diag_E))

    T_nm = bar_nm * fac.K_nm
    T_m = bar_m * fac.K_m_pure
    sf2 = params.signal_variance
    grad = np.empty(d + 2 + m * d)
    grad[0] = float(np.sum(T_nm)) + float(np.sum(T_m)) + sf2 * tr_E
    grad[d + 1] = params.noise_variance * tr_E
    pseudo_grad = np.empty((m, d))
    for k in range(d):
        inv_l2 = 1.0 / params.lengthscales[k] ** 2
        diff_nm = X[:, k, None] - pseudo[None, :, k]
        diff_m = pseudo[:, k, None] - pseudo[None, :, k]
        grad[1 + k] = inv_l2 * (float(np.sum(T_nm * diff_nm * diff_nm))
                                + float(np.sum(T_m * diff_m * diff_m)))
        pseudo_grad[:, k] = inv_l2 * (np.sum(T_nm * diff_nm, axis=0)
                                      - 2.0 * np.sum(T_m * diff_m, axis=1))
    grad[d + 2:] = pseudo_grad.ravel()
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite sparse likelihood gradient",
                             params=np.concatenate([params.to_log_vector(), pseudo.ravel()]))
    return value, grad


# ---------------------------------------------------------------------------
# Model


@dataclass
class SpgpModel:
    """Fitted sparse GP with cached low-rank factors.

    ``mean_weights`` gives the O(m) predictive mean ``k(x*, pseudo) @ w``;
    ``L_m``/``L_B`` support the O(m^2) predictive variance; ``A``/``gamma``
    support applying ``Delta^{-1}`` to arbitrary vectors.  ``proj_gram`` is
    ``K_m^{-1} K_mn K_nm K_m^{-1}``, needed by the boundary machinery built
    on top of this model.
    """

    params: KernelParams
    pseudo: np.ndarray
    X: np.ndarray
    y: np.ndarray
    L_m: np.ndarray
    L_B: np.ndarray
    A: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    mean_weights: np.ndarray
    y_delta_y: float
    proj_gram: np.ndarray
    log_likelihood: float = np.nan
    n_iter: int = 0
    converged: bool = True
    message: str = ""

    @property
    def m(self) -> int:
        return self.pseudo.shape[0]

    def predict(self, x_star, include_noise=False):
        return spgp_predict(self, x_star, include_noise=include_noise)


def build_spgp(params: KernelParams, pseudo, data: Dataset) -> SpgpModel:
    """Assemble a sparse model at fixed parameters (no optimization)."""
    pseudo = np.array(pseudo, dtype=float, copy=True)
    if pseudo.ndim != 2 or pseudo.shape[1] != data.d:
        raise InvalidInputError(
            f"pseudo-inputs must have shape (m, {data.d}), got {pseudo.shape}")
    fac = _Factors(params, pseudo, data.X)
    alpha = fac.solve(data.y)
    value = -0.5 * float(data.y @ alpha) - 0.5 * fac.logdet - 0.5 * data.n * LOG_2PI
    u = fac.Ag @ data.y
    s = cho_solve((fac.L_B, True), u)
    mean_weights = solve_triangular(fac.L_m, s, lower=True, trans="T")
    G0 = fac.A @ fac.A.T
    Z = solve_triangular(fac.L_m, G0, lower=True, trans="T")
    proj_gram = solve_triangular(fac.L_m, Z.T, lower=True, trans="T").T
    proj_gram = 0.5 * (proj_gram + proj_gram.T)
    return SpgpModel(
        params=params, pseudo=pseudo, X=data.X, y=data.y,
        L_m=fac.L_m, L_B=fac.L_B, A=fac.A, gamma=fac.gamma, alpha=alpha,
        mean_weights=mean_weights, y_delta_y=float(data.y @ alpha),
        proj_gram=proj_gram, log_likelihood=value,
    )


def solve_delta(model: SpgpModel, V):
    """Apply ``Delta^{-1}`` to a vector or matrix using the cached factors."""
    V = np.asarray(V, dtype=float)
    vec = V.ndim == 1
    Vm = V[:, None] if vec else V
    t = Vm / model.gamma[:, None]
    s = cho_solve((model.L_B, True), (model.A @ t))
    out = t - (model.A.T @ s) / model.gamma[:, None]
    return out[:, 0] if vec else out


def pack_theta(params: KernelParams, pseudo) -> np.ndarray:
    """Optimizer coordinates: log hyperparameters then pseudo rows."""
    return np.concatenate([params.to_log_vector(), np.asarray(pseudo, float).ravel()])


def unpack_theta(theta, d, jitter):
    """Inverse of :func:`pack_theta` for inputs of dimension ``d``."""
    theta = np.asarray(theta, dtype=float)
    params = KernelParams.from_log_vector(theta[:d + 2], jitter=jitter)
    pseudo = theta[d + 2:].reshape(-1, d)
    return params, pseudo


def fit_spgp(data: Dataset, m: int, init: KernelParams = None, seed: int = 0,
             settings: OptimizerSettings = None, optimize: bool = True,
             pseudo_init=None) -> SpgpModel:
    """Fit hyperparameters and pseudo-input locations jointly.

    Pseudo-inputs start at a seeded uniform subsample of the training inputs
    (without replacement) and move freely during the quasi-Newton ascent.
    With ``optimize=False`` the model is assembled at the initialization,
    which with ``m == n`` reproduces the exact GP.
    """
    if not (1 <= m <= data.n):
        raise InvalidInputError(f"need 1 <= m <= n = {data.n}, got m = {m}")
    if init is None:
        init = default_params(data.X, data.y)
    if settings is None:
        settings = OptimizerSettings(max_iter=500, restarts=1)
    if pseudo_init is None:
        rng = np.random.default_rng(seed)
        idx = rng.choice(data.n, size=m, replace=False)
        pseudo_init = data.X[idx]
    pseudo_init = np.array(pseudo_init, dtype=float, copy=True)
    if pseudo_init.shape != (m, data.d):
        raise InvalidInputError(
            f"pseudo_init must have shape ({m}, {data.d}), got {pseudo_init.shape}")

    if not optimize:
        model = build_spgp(init, pseudo_init, data)
        model.message = "optimizer disabled"
        return model

    jitter = init.jitter
    d = data.d

    def value_and_grad(theta):
        params, pseudo = unpack_theta(theta, d, jitter)
        return spgp_log_marginal(params, pseudo, data)

    res = maximize(value_and_grad, pack_theta(init, pseudo_init), settings)
    params, pseudo = unpack_theta(res.x, d, jitter)
    model = build_spgp(params, pseudo, data)
    model.n_iter = res.n_iter
    model.converged = bool(res.converged and np.isfinite(res.value))
    model.message = res.message
    return model


def spgp_predict(model: SpgpModel, x_star, include_noise=False):
    """Predictive mean and variance at one point or a batch.

    O(m^2) per query: the mean is an m-term weighted kernel sum and the
    variance needs two triangular solves against the cached factors.  The
    returned variance is for the latent function unless ``include_noise``.
    """
    x_star = np.asarray(x_star, dtype=float)
    single = x_star.ndim == 1
    Xq = x_star[None, :] if single else x_star
    if Xq.ndim != 2 or Xq.shape[1] != model.params.n_dims:
        raise InvalidInputError(
            f"query must have dimension {model.params.n_dims}, got shape {x_star.shape}")
    k_mq = kernel_matrix(model.params, model.pseudo, Xq)
    mean = k_mq.T @ model.mean_weights
    lm = solve_triangular(model.L_m, k_mq, lower=True)
    lb = solve_triangular(model.L_B, lm, lower=True)
    var = (model.params.signal_variance
           - np.sum(lm * lm, axis=0)
           + np.sum(lb * lb, axis=0))
    np.maximum(var, 0.0, out=var)
    if include_noise:
        var = var + model.params.noise_variance
    if single:
        return float(mean[0]), float(var[0])
    return mean, var
