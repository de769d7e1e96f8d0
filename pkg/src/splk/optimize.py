"""Shared quasi-Newton driver for likelihood maximization.

Thin wrapper over L-BFGS-B that (a) maximizes instead of minimizes, (b)
treats non-finite objective values as soft failures instead of crashing, and
(c) always reports the best finite iterate seen, so callers get a usable
model even when a line search wanders into an overflow region.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import FactorizationError, NumericalError

# Failure modes a line search may legitimately wander into; anything else is
# a real bug and propagates.
_SOFT_FAILURES = (FactorizationError, NumericalError, FloatingPointError,
                  OverflowError, np.linalg.LinAlgError, scipy.linalg.LinAlgError)


@dataclass
class OptimizerSettings:
    """Knobs for the quasi-Newton fits.

    ``restarts`` counts total starts for multi-start fits (the first start is
    the unperturbed initialization); single-start fits ignore it.
    """

    max_iter: int = 200
    grad_tol: float = 1e-5
    restarts: int = 3
    perturb_scale: float = 0.3
    seed: int = 0


@dataclass
class OptResult:
    x: np.ndarray
    value: float
    n_iter: int
    converged: bool
    message: str


def maximize(value_and_grad, x0, settings: OptimizerSettings) -> OptResult:
    """Maximize a callable returning ``(value, gradient)`` from ``x0``.

    Stops when the projected gradient infinity-norm drops below
    ``settings.grad_tol`` or after ``settings.max_iter`` iterations.  If the
    objective ever comes back non-finite, that evaluation is reported to the
    optimizer as -inf and the search continues from the best finite point.
    """
    x0 = np.asarray(x0, dtype=float)
    best = {"x": x0.copy(), "value": -np.inf}

    def negative(x):
        try:
            val, grad = value_and_grad(x)
        except _SOFT_FAILURES:
            return np.inf, np.zeros_like(x)
        if not np.isfinite(val) or not np.all(np.isfinite(grad)):
            return np.inf, np.zeros_like(x)
        if val > best["value"]:
            best["value"] = val
            best["x"] = np.array(x, copy=True)
        return -val, -np.asarray(grad)

    res = scipy.optimize.minimize(
        negative, x0, jac=True, method="L-BFGS-B",
        options=dict(maxiter=settings.max_iter, gtol=settings.grad_tol, ftol=1e-12),
    )
    if np.isfinite(best["value"]):
        x_best, f_best = best["x"], best["value"]
        converged = bool(res.success)
        message = str(res.message)
    else:
        x_best, f_best = x0, -np.inf
        converged = False
        message = "no finite objective value encountered"
    return OptResult(x=x_best, value=f_best, n_iter=int(res.nit),
                     converged=converged, message=message)


def perturbed_starts(x0, settings: OptimizerSettings):
    """The multi-start initial points: ``x0`` first, then seeded Gaussian jitters."""
    x0 = np.asarray(x0, dtype=float)
    starts = [x0]
    rng = np.random.default_rng(settings.seed)
    for _ in range(max(0, settings.restarts - 1)):
        starts.append(x0 + settings.perturb_scale * rng.standard_normal(x0.shape))
    return starts
