"""Anisotropic squared-exponential covariance and its parameterization.

All models in this package share one stationary kernel,

    k(x, x') = signal_variance * exp(-0.5 * sum_k (x_k - x'_k)^2 / lengthscale_k^2),

with one lengthscale per input dimension and an additive observation noise
variance handled by the callers.  Hyperparameters are optimized in log space;
:meth:`KernelParams.to_log_vector` / :meth:`KernelParams.from_log_vector`
define the packing used by every optimizer in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .errors import FactorizationError, InvalidInputError

# Relative size of the default diagonal regularizer for square self-covariance
# matrices, and the ceiling jitter escalation is allowed to reach.
DEFAULT_JITTER_SCALE = 1e-8
MAX_JITTER_SCALE = 1e-4


@dataclass
class KernelParams:
    """Kernel hyperparameters plus numerical safeguards.

    Parameters
    ----------
    signal_variance : float
        Prior variance of the latent function, > 0.
    lengthscales : array_like, shape (d,)
        Per-dimension lengthscales, all > 0.
    noise_variance : float
        Observation noise variance, > 0.
    jitter : float, optional
        Absolute diagonal regularizer added to square self-covariance
        matrices.  Defaults to ``1e-8 * signal_variance`` at construction and
        is then held fixed, so likelihood gradients never see it move.
    """

    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float
    jitter: float = field(default=None)

    def __post_init__(self):
        self.lengthscales = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        self.signal_variance = float(self.signal_variance)
        self.noise_variance = float(self.noise_variance)
        if not np.all(np.isfinite(self.lengthscales)) or np.any(self.lengthscales <= 0):
            raise InvalidInputError(f"lengthscales must be positive and finite, got {self.lengthscales}")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise InvalidInputError(f"signal_variance must be positive, got {self.signal_variance}")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise InvalidInputError(f"noise_variance must be >= 0, got {self.noise_variance}")
        if self.jitter is None:
            self.jitter = DEFAULT_JITTER_SCALE * self.signal_variance
        self.jitter = float(self.jitter)

    @property
    def n_dims(self) -> int:
        return self.lengthscales.shape[0]

    def to_log_vector(self) -> np.ndarray:
        """Pack as ``[log sf2, log l_1..l_d, log noise]``.

        A zero noise variance maps to ``-inf``; ``from_log_vector``
        round-trips it back to exactly zero.
        """
        with np.errstate(divide="ignore"):
            return np.concatenate((
                [np.log(self.signal_variance)],
                np.log(self.lengthscales),
                [np.log(self.noise_variance)],
            ))

    @classmethod
    def from_log_vector(cls, v: np.ndarray, jitter: float = None) -> "KernelParams":
        """Inverse of :meth:`to_log_vector`; ``jitter`` is carried separately.

        Finite log values are clamped to +-300 so that extreme optimizer
        proposals keep the whole downstream kernel algebra finite: the
        parameters themselves stay positive (no underflow-to-zero mid
        line-search), and squared scaled coordinates ``(x / l)**2`` cannot
        overflow into ``inf - inf`` NaNs inside distance expansions.  An
        exact ``-inf`` still round-trips to zero.
        """
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] < 3:
            raise InvalidInputError(f"log vector must be 1-D with >= 3 entries, got shape {v.shape}")
        v = np.where(np.isfinite(v), np.clip(v, -300.0, 300.0), v)
        return cls(
            signal_variance=np.exp(v[0]),
            lengthscales=np.exp(v[1:-1]),
            noise_variance=np.exp(v[-1]),
            jitter=jitter,
        )

    def with_values(self, **kwargs) -> "KernelParams":
        return replace(self, **kwargs)


def default_params(X: np.ndarray, y: np.ndarray) -> KernelParams:
    """Deterministic data-driven initialization for hyperparameter fits.

    Signal variance and noise start at var(y) and var(y)/10; each lengthscale
    starts at the standard deviation of its input column (floored away from
    zero for constant columns).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    vy = float(np.var(y))
    if vy <= 0:
        vy = 1.0
    scales = np.std(X, axis=0)
    span = np.max(scales) if np.max(scales) > 0 else 1.0
    scales = np.where(scales > 1e-12 * span, scales, span)
    return KernelParams(signal_variance=vy, lengthscales=scales, noise_variance=0.1 * vy)


def _check_point(params: KernelParams, x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidInputError(f"{name} must be a 1-D point, got shape {x.shape}")
    if x.shape[0] != params.n_dims:
        raise InvalidInputError(
            f"{name} has dimension {x.shape[0]} but kernel has {params.n_dims} lengthscales")
    return x


def kernel_eval(params: KernelParams, x, x2) -> float:
    """Covariance between two points.

    Exactly symmetric in its arguments; equals ``signal_variance`` at zero
    distance and decays to zero with separation.
    """
    x = _check_point(params, x, "x")
    x2 = _check_point(params, x2, "x2")
    z = (x - x2) / params.lengthscales
    return params.signal_variance * float(np.exp(-0.5 * np.dot(z, z)))


def kernel_matrix(params: KernelParams, X, X2=None) -> np.ndarray:
    """Covariance matrix between two point sets.

    Parameters
    ----------
    params : KernelParams
    X : array, shape (n, d)
    X2 : array, shape (m, d), optional
        When omitted, the self-covariance of ``X`` is returned: exactly
        symmetric, with ``params.jitter`` added to the diagonal so that a
        Cholesky factorization succeeds for distinct points.

    Returns
    -------
    array, shape (n, m) — or (n, n) with jitter on the diagonal when ``X2``
    is omitted.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.n_dims:
        raise InvalidInputError(
            f"X must have shape (n, {params.n_dims}), got {X.shape}")
    Xs = X / params.lengthscales
    if X2 is None:
        sq = np.sum(Xs * Xs, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (Xs @ Xs.T)
        np.maximum(d2, 0.0, out=d2)
        d2 = 0.5 * (d2 + d2.T)
        K = params.signal_variance * np.exp(-0.5 * d2)
        K[np.diag_indices_from(K)] += params.jitter
        return K
    X2 = np.asarray(X2, dtype=float)
    if X2.ndim != 2 or X2.shape[1] != params.n_dims:
        raise InvalidInputError(
            f"X2 must have shape (m, {params.n_dims}), got {X2.shape}")
    X2s = X2 / params.lengthscales
    d2 = (np.sum(Xs * Xs, axis=1)[:, None]
          + np.sum(X2s * X2s, axis=1)[None, :]
          - 2.0 * (Xs @ X2s.T))
    np.maximum(d2, 0.0, out=d2)
    return params.signal_variance * np.exp(-0.5 * d2)


def chol_with_jitter(A: np.ndarray, scale: float, base_jitter: float = None):
    """Lower Cholesky factor of ``A`` with escalating diagonal regularization.

    ``A`` is assumed to already include any baseline jitter.  On failure, adds
    ``base_jitter`` (default ``1e-8 * scale``) to the diagonal and escalates
    tenfold up to ``1e-4 * scale`` before giving up.

    Returns
    -------
    (L, added) : lower-triangular factor and the total extra jitter added.

    Raises
    ------
    FactorizationError
        If ``A`` contains non-finite entries (no amount of jitter can help)
        or no tried regularization makes the factorization succeed.
    """
    if not np.all(np.isfinite(A)):
        raise FactorizationError(
            "matrix contains non-finite entries; cannot factorize")
    try:
        return scipy.linalg.cholesky(A, lower=True), 0.0
    except scipy.linalg.LinAlgError:
        pass
    jitter = base_jitter if base_jitter is not None else DEFAULT_JITTER_SCALE * scale
    ceiling = MAX_JITTER_SCALE * scale
    eye = np.eye(A.shape[0])
    while jitter <= ceiling:
        try:
            return scipy.linalg.cholesky(A + jitter * eye, lower=True), jitter
        except scipy.linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"Cholesky failed for {A.shape[0]}x{A.shape[0]} matrix even with jitter {ceiling:g}")
