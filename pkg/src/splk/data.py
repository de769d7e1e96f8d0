"""Datasets, synthetic generators, CSV handling, and evaluation metrics.

The synthetic generators cover the two regimes the models are exercised on:
``gen_gp_sample`` draws from a stationary Gaussian process (the regime the
plain models are built for) while ``gen_fluctuated`` produces a strongly
non-stationary response whose oscillation scale varies across the box, which
is where the partitioned model earns its keep.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError
from .kernel import KernelParams, chol_with_jitter, kernel_matrix

# Largest size for which an exact dense draw from the GP prior is attempted.
MAX_EXACT_GP_SAMPLE = 8000

# Warn when a dimension-augmentation shift exceeds this fraction of the
# target span; past that the "small additive perturbation" reading breaks.
AUGMENT_SPAN_FRACTION = 0.1


@dataclass
class Standardization:
    """Affine per-column shifts/scales mapping raw data to fitted data."""

    y_shift: float = 0.0
    y_scale: float = 1.0
    x_shift: np.ndarray = None
    x_scale: np.ndarray = None


@dataclass
class Dataset:
    """Immutable-by-convention container of inputs and targets.

    Parameters
    ----------
    X : array, shape (n, d)
    y : array, shape (n,)
    columns : list of str, optional
        Input column names followed by the target name.
    standardization : Standardization, optional
        Record of any standardization already applied to this data.
    """

    X: np.ndarray
    y: np.ndarray
    columns: list = None
    standardization: Standardization = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise InvalidInputError(
                f"inputs and targets disagree on size: {self.X.shape[0]} vs {self.y.shape[0]}")
        if self.X.shape[0] == 0:
            raise InvalidInputError("dataset is empty")
        if not np.all(np.isfinite(self.X)) or not np.all(np.isfinite(self.y)):
            raise InvalidInputError("dataset contains non-finite values")
        if self.columns is not None and len(self.columns) != self.d + 1:
            raise InvalidInputError(
                f"expected {self.d + 1} column names, got {len(self.columns)}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def default_columns(self) -> list:
        if self.columns is not None:
            return list(self.columns)
        return [f"x{k + 1}" for k in range(self.d)] + ["y"]


# ---------------------------------------------------------------------------
# Standardization


def standardize(data: Dataset, targets: bool = True, inputs: bool = False):
    """Shift/scale columns to zero mean and unit variance.

    By default only the target column is standardized (models assume a
    zero-mean response); input standardization is opt-in.  Columns whose
    values are all identical are centered at that exact value and keep
    scale 1, so the transform stays invertible and does not amplify the
    rounding noise a near-zero standard deviation would otherwise inject.

    Returns
    -------
    (Dataset, Standardization)
    """
    record = Standardization()
    X, y = data.X, data.y
    if targets:
        constant = np.ptp(y) == 0
        record.y_shift = float(y[0]) if constant else float(np.mean(y))
        s = 0.0 if constant else float(np.std(y))
        record.y_scale = s if s > 0 else 1.0
        y = (y - record.y_shift) / record.y_scale
    if inputs:
        constant = np.ptp(X, axis=0) == 0
        record.x_shift = np.where(constant, X[0], np.mean(X, axis=0))
        s = np.where(constant, 0.0, np.std(X, axis=0))
        record.x_scale = np.where(s > 0, s, 1.0)
        X = (X - record.x_shift) / record.x_scale
    out = replace(data, X=X, y=y, standardization=record)
    return out, record


def destandardize_mean(mean, record: Standardization):
    """Map predictive means back to the raw target scale."""
    return np.asarray(mean) * record.y_scale + record.y_shift


def destandardize_variance(var, record: Standardization):
    """Map predictive variances back to the raw target scale."""
    return np.asarray(var) * record.y_scale ** 2


def transform_inputs(X, record: Standardization):
    """Apply a fitted input standardization to query points."""
    if record is None or record.x_shift is None:
        return np.asarray(X, dtype=float)
    return (np.asarray(X, dtype=float) - record.x_shift) / record.x_scale


# ---------------------------------------------------------------------------
# Generators

FLUCTUATED_PRESETS = {
    "syn-3d": dict(d=3, p=(1.0, 1.0, -1.0), q=(0.2, 0.0, 0.0), c=0.3, a=-5.0, b=5.0),
    "syn-5d": dict(d=5, p=(1.0, -1.0, 1.0, 1.0, 1.0), q=(0.2, 0.0, 0.0, 0.0, 0.0),
                   c=0.3, a=-2.0, b=2.0),
}

DEFAULT_BOX = (0.0, 10.0)


def gen_fluctuated(n, d, p, q, c, a, b, seed, box=DEFAULT_BOX) -> Dataset:
    """Non-stationary synthetic response with uniform additive noise.

    Inputs are uniform on ``box^d`` and

        y = exp(|p . x|^c) * cos(q . x) + eps,    eps ~ U[a, b],

    with noise disabled when ``a == b == 0``.  The exponential factor makes
    the response surface fluctuate much faster in some regions of the box
    than others.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (d,) or q.shape != (d,):
        raise InvalidInputError(f"p and q must have shape ({d},), got {p.shape} and {q.shape}")
    if not (a <= b):
        raise InvalidInputError(f"noise bounds must satisfy a <= b, got ({a}, {b})")
    if c <= 0:
        raise InvalidInputError(f"fluctuation exponent must be positive, got {c}")
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    lo, hi = box
    X = rng.uniform(lo, hi, size=(n, d))
    core = np.exp(np.abs(X @ p) ** c) * np.cos(X @ q)
    if a == b:
        y = core + a
    else:
        y = core + rng.uniform(a, b, size=n)
    meta = dict(generator="fluctuated", p=tuple(p), q=tuple(q), c=c, a=a, b=b,
                seed=seed, box=tuple(box))
    return Dataset(X=X, y=y, meta=meta)


def fluctuated_from_preset(name, n, seed, noise=True) -> Dataset:
    """Instantiate a named fluctuated generator at size ``n``."""
    if name not in FLUCTUATED_PRESETS:
        raise InvalidInputError(
            f"unknown preset {name!r}; available: {sorted(FLUCTUATED_PRESETS)}")
    cfg = dict(FLUCTUATED_PRESETS[name])
    if not noise:
        cfg["a"] = cfg["b"] = 0.0
    return gen_fluctuated(n=n, seed=seed, **cfg)


def gen_gp_sample(n, d, params: KernelParams, seed, box=DEFAULT_BOX) -> Dataset:
    """Exact draw from a stationary GP prior plus Gaussian noise.

    Uses a dense Cholesky factor of the full covariance, so the size is
    capped at ``MAX_EXACT_GP_SAMPLE``; larger requests are refused rather
    than silently approximated.
    """
    if n > MAX_EXACT_GP_SAMPLE:
        raise InvalidInputError(
            f"exact GP sampling is capped at n = {MAX_EXACT_GP_SAMPLE}; got {n}")
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    lo, hi = box
    X = rng.uniform(lo, hi, size=(n, d))
    K = kernel_matrix(params, X)
    K[np.diag_indices_from(K)] += params.noise_variance
    L, _ = chol_with_jitter(K, params.signal_variance)
    y = L @ rng.standard_normal(n)
    meta = dict(generator="gp-sample", seed=seed, box=tuple(box),
                signal_variance=params.signal_variance,
                lengthscales=tuple(params.lengthscales),
                noise_variance=params.noise_variance)
    return Dataset(X=X, y=y, meta=meta)


SHIFT_FUNCTIONS = {
    "neg-abs-cos": lambda z: -2.5 * np.abs(np.cos(z)),
}


def augment_dimension(data: Dataset, a=-50.0, b=50.0, g="neg-abs-cos", seed=0) -> Dataset:
    """Append an extra input dimension with a small additive target shift.

    Draws ``z ~ U[a, b]``, appends it as the last input column, and replaces
    the targets by ``y + g(z)``.  The named shift function defaults to
    ``-2.5 |cos z|``.  Warns when the shift magnitude is non-negligible
    relative to the target span, since downstream comparisons assume the
    original response dominates.
    """
    if isinstance(g, str):
        if g not in SHIFT_FUNCTIONS:
            raise InvalidInputError(
                f"unknown shift function {g!r}; available: {sorted(SHIFT_FUNCTIONS)}")
        gfun = SHIFT_FUNCTIONS[g]
    else:
        gfun = g
    if not (a < b):
        raise InvalidInputError(f"need a < b for the augmented range, got ({a}, {b})")
    rng = np.random.default_rng(seed)
    z = rng.uniform(a, b, size=data.n)
    gz = np.asarray(gfun(z), dtype=float)
    span = float(np.max(data.y) - np.min(data.y))
    peak = float(np.max(np.abs(gz)))
    if span > 0 and peak > AUGMENT_SPAN_FRACTION * span:
        warnings.warn(
            f"augmentation shift reaches {peak:.3g}, more than "
            f"{AUGMENT_SPAN_FRACTION:.0%} of the target span {span:.3g}",
            stacklevel=2)
    X = np.hstack([data.X, z[:, None]])
    columns = None
    if data.columns is not None:
        columns = data.columns[:-1] + [f"x{data.d + 1}", data.columns[-1]]
    meta = dict(data.meta)
    meta.update(augmented=dict(a=a, b=b, g=g if isinstance(g, str) else "custom", seed=seed))
    return Dataset(X=X, y=data.y + gz, columns=columns, meta=meta)


# ---------------------------------------------------------------------------
# Splits and metrics


def split(data: Dataset, frac=0.9, seed=0):
    """Random train/test split with ``ceil(frac * n)`` training points."""
    if not (0.0 < frac < 1.0):
        raise InvalidInputError(f"train fraction must lie in (0, 1), got {frac}")
    n_train = math.ceil(frac * data.n)
    if n_train >= data.n or n_train < 1:
        raise InvalidInputError(
            f"split of {data.n} points at frac={frac} leaves an empty side")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    tr, te = perm[:n_train], perm[n_train:]
    cols = data.columns
    train = Dataset(X=data.X[tr], y=data.y[tr], columns=cols, meta=dict(data.meta))
    test = Dataset(X=data.X[te], y=data.y[te], columns=cols, meta=dict(data.meta))
    return train, test


def mse(predictions, actuals) -> float:
    """Mean squared error between two equally sized vectors."""
    predictions = np.asarray(predictions, dtype=float).ravel()
    actuals = np.asarray(actuals, dtype=float).ravel()
    if predictions.shape != actuals.shape:
        raise InvalidInputError(
            f"prediction/actual size mismatch: {predictions.shape} vs {actuals.shape}")
    if predictions.size == 0:
        raise InvalidInputError("cannot score an empty prediction set")
    diff = predictions - actuals
    return float(np.mean(diff * diff))


# ---------------------------------------------------------------------------
# CSV


def save_csv(data: Dataset, path, config: dict = None):
    """Write a dataset as CSV with 17-significant-digit floats.

    Optional ``config`` entries are embedded as ``# key = value`` comment
    lines before the header, so every artifact records how it was produced.
    """
    cols = data.default_columns()
    with open(path, "w", newline="") as fh:
        if config:
            for key, val in config.items():
                fh.write(f"# {key} = {val}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for xi, yi in zip(data.X, data.y):
            writer.writerow([format(v, ".17g") for v in xi] + [format(yi, ".17g")])


def load_csv(path, target_column=None, has_header=True) -> Dataset:
    """Read a dataset from CSV.

    Parameters
    ----------
    path : str
    target_column : str or int, optional
        Name (requires a header) or index of the target column; defaults to
        the last column.
    has_header : bool

    Comment lines starting with ``#`` and blank lines are skipped.  A cell
    that fails to parse raises :class:`InvalidInputError` naming its line
    and column; rows that parse but contain non-finite values are dropped
    with a warning listing their line numbers.
    """
    rows, line_numbers = [], []
    header = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if row[0].lstrip().startswith("#"):
                continue
            if has_header and header is None:
                header = [c.strip() for c in row]
                continue
            rows.append(row)
            line_numbers.append(lineno)
    if not rows:
        raise InvalidInputError(f"{path}: no data rows found")

    ncol = len(rows[0])
    if header is not None and len(header) != ncol:
        raise InvalidInputError(
            f"{path}: header has {len(header)} columns but rows have {ncol}")
    if header is None:
        header = [f"x{k + 1}" for k in range(ncol)]

    if target_column is None:
        target_idx = ncol - 1
    elif isinstance(target_column, int):
        target_idx = target_column if target_column >= 0 else ncol + target_column
    else:
        if target_column not in header:
            raise InvalidInputError(
                f"{path}: target column {target_column!r} not in header {header}")
        target_idx = header.index(target_column)
    if not (0 <= target_idx < ncol):
        raise InvalidInputError(f"{path}: target column index {target_idx} out of range")

    values = np.empty((len(rows), ncol))
    for i, (row, lineno) in enumerate(zip(rows, line_numbers)):
        if len(row) != ncol:
            raise InvalidInputError(
                f"{path}: line {lineno} has {len(row)} columns, expected {ncol}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise InvalidInputError(
                    f"{path}: line {lineno}, column {j + 1}: cannot parse {cell.strip()!r}") from None

    finite = np.all(np.isfinite(values), axis=1)
    if not np.all(finite):
        bad = [line_numbers[i] for i in np.flatnonzero(~finite)]
        warnings.warn(
            f"{path}: dropped {len(bad)} rows with non-finite values (lines {bad})",
            stacklevel=2)
        values = values[finite]
    if values.shape[0] == 0:
        raise InvalidInputError(f"{path}: all rows were non-finite")

    input_idx = [j for j in range(ncol) if j != target_idx]
    columns = [header[j] for j in input_idx] + [header[target_idx]]
    return Dataset(X=values[:, input_idx], y=values[:, target_idx], columns=columns)
