"""Axis-aligned domain decomposition and boundary control-point grids.

A box domain is sliced by ``c`` parallel cuts orthogonal to one axis into
``S = c + 1`` subdomains, so every subdomain has at most two neighbors and
every internal boundary is a (d-1)-dimensional face.  Each face carries a
regular grid of ``(fold + 1)^(d-1)`` control points at which neighboring
local models are later tied together.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PartitionError

# Soft guidance for the pseudo-input density multiplier; values outside are
# legal but warned about.
PSEUDO_DENSITY_RANGE = (0.1, 4.0)

WIDTH_MODES = ("fixed-width", "equal-count")


@dataclass
class OrthopeDomain:
    """Axis-aligned box: per-axis (lower, upper) bounds."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise InvalidInputError("domain bounds must be matching 1-D arrays")
        if np.any(self.lower > self.upper):
            raise InvalidInputError(
                f"domain has lower > upper: {self.lower} vs {self.upper}")

    @property
    def d(self) -> int:
        return self.lower.shape[0]


@dataclass
class AxisRotation:
    """Orthonormal change of coordinates ``x -> (x - mean) @ components.T``.

    Rows of ``components`` are the new axes, ordered by decreasing variance
    of the data the rotation was fit to.
    """

    mean: np.ndarray
    components: np.ndarray

    def apply(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        out = (np.atleast_2d(X) - self.mean) @ self.components.T
        return out[0] if single else out

    def invert(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        out = np.atleast_2d(X) @ self.components + self.mean
        return out[0] if single else out


@dataclass
class PartitionSpec:
    """One-axis slicing of a domain plus the boundary-grid densities."""

    axis: int
    cuts: np.ndarray            # sorted, strictly inside the domain
    fold_density: int           # lambda: grid has (lambda + 1) ticks per free axis
    pseudo_density: float       # k: local pseudo-input count scales with k * sqrt(n_j)
    width_mode: str = "equal-count"

    def __post_init__(self):
        self.cuts = np.atleast_1d(np.asarray(self.cuts, dtype=float)) \
            if np.size(self.cuts) else np.empty(0)
        if self.cuts.size > 1 and np.any(np.diff(self.cuts) <= 0):
            raise InvalidInputError(f"cut positions must be strictly increasing: {self.cuts}")
        if self.fold_density < 1:
            raise InvalidInputError(f"fold density must be >= 1, got {self.fold_density}")

    @property
    def n_subdomains(self) -> int:
        return self.cuts.size + 1

    @property
    def n_boundaries(self) -> int:
        return self.cuts.size


@dataclass
class BoundaryGrid:
    """Control points on the face between subdomains ``left`` and ``right``."""

    left: int
    right: int
    position: float
    points: np.ndarray          # ((fold + 1)^(d-1), d)


def face_count(d: int, m: int) -> int:
    """Number of m-dimensional faces of a d-dimensional box: 2^(d-m) C(d, m)."""
    if d < 1:
        raise InvalidInputError(f"need d >= 1, got {d}")
    if not (0 <= m < d):
        raise InvalidInputError(f"face dimension must satisfy 0 <= m < d, got m={m}, d={d}")
    return 2 ** (d - m) * math.comb(d, m)


def infer_domain(X) -> OrthopeDomain:
    """Tightest axis-aligned box containing the points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise InvalidInputError("cannot infer a domain from zero points")
    return OrthopeDomain(lower=X.min(axis=0), upper=X.max(axis=0))


def make_cuts(domain: OrthopeDomain, X, axis: int, n_subdomains: int,
              width_mode: str = "equal-count", fold_density: int = 3,
              pseudo_density: float = 2.0) -> PartitionSpec:
    """Choose cut positions along one axis.

    ``fixed-width`` spaces the cuts evenly over the domain extent;
    ``equal-count`` places them at midpoints between order statistics so the
    subdomain point counts differ by at most one.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not (0 <= axis < domain.d):
        raise InvalidInputError(f"axis {axis} out of range for a {domain.d}-D domain")
    if X.shape[1] != domain.d:
        raise InvalidInputError(f"points are {X.shape[1]}-D but domain is {domain.d}-D")
    if n_subdomains < 1:
        raise InvalidInputError(f"need at least one subdomain, got {n_subdomains}")
    if width_mode not in WIDTH_MODES:
        raise InvalidInputError(f"width mode must be one of {WIDTH_MODES}, got {width_mode!r}")

    if n_subdomains == 1:
        cuts = np.empty(0)
    elif width_mode == "fixed-width":
        lo, hi = domain.lower[axis], domain.upper[axis]
        if hi <= lo:
            raise PartitionError(
                f"cannot cut axis {axis}: domain is degenerate there ([{lo}, {hi}])")
        cuts = lo + (hi - lo) * np.arange(1, n_subdomains) / n_subdomains
    else:
        x = np.sort(X[:, axis])
        n = x.size
        n_distinct = np.unique(x).size
        if n_subdomains > n_distinct:
            raise PartitionError(
                f"cannot separate {n_subdomains} subdomains along axis {axis}: "
                f"only {n_distinct} distinct values")
        base, rem = divmod(n, n_subdomains)
        sizes = np.full(n_subdomains, base)
        sizes[:rem] += 1
        edges = np.cumsum(sizes)[:-1]
        cuts = 0.5 * (x[edges - 1] + x[edges])
        if np.any(np.diff(cuts) <= 0) or np.any(x[edges - 1] == x[edges]):
            raise PartitionError(
                f"ties along axis {axis} prevent an equal-count split into "
                f"{n_subdomains} subdomains; try fixed-width")
    return PartitionSpec(axis=axis, cuts=cuts, fold_density=fold_density,
                         pseudo_density=pseudo_density, width_mode=width_mode)


def assign_points(spec: PartitionSpec, X) -> np.ndarray:
    """Subdomain index per point: half-open intervals, final one closed.

    A point exactly on a cut belongs to the higher-indexed subdomain, and
    points outside the domain map to the nearest subdomain along the cut
    axis, so every query is always owned by exactly one subdomain.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] <= spec.axis:
        raise InvalidInputError(
            f"points are {X.shape[1]}-D but the cut axis is {spec.axis}")
    return np.searchsorted(spec.cuts, X[:, spec.axis], side="right")


def control_point_grid(domain: OrthopeDomain, spec: PartitionSpec,
                       boundary: int) -> BoundaryGrid:
    """Regular control-point grid on one internal boundary face.

    Every non-cut axis gets ``fold_density + 1`` evenly spaced ticks spanning
    the domain; their Cartesian product (with the cut coordinate fixed at the
    cut position) gives ``(fold_density + 1)^(d-1)`` points in lexicographic
    order.
    """
    if not (0 <= boundary < spec.n_boundaries):
        raise InvalidInputError(
            f"boundary index {boundary} out of range (have {spec.n_boundaries})")
    ticks = []
    free_axes = [k for k in range(domain.d) if k != spec.axis]
    for k in free_axes:
        lo, hi = domain.lower[k], domain.upper[k]
        if hi <= lo:
            warnings.warn(
                f"axis {k} is degenerate ([{lo}, {hi}]); its control grid collapses",
                stacklevel=2)
        ticks.append(np.linspace(lo, hi, spec.fold_density + 1))
    q = (spec.fold_density + 1) ** len(free_axes)
    points = np.empty((q, domain.d))
    points[:, spec.axis] = spec.cuts[boundary]
    if free_axes:
        mesh = np.meshgrid(*ticks, indexing="ij")
        for ax, grid in zip(free_axes, mesh):
            points[:, ax] = grid.ravel()
    return BoundaryGrid(left=boundary, right=boundary + 1,
                        position=float(spec.cuts[boundary]), points=points)


def pca_rotate(X):
    """Rotate points onto their principal axes (decreasing variance order).

    Returns ``(rotated, AxisRotation)``.  The rotation is orthonormal, hence
    distance-preserving, and deterministic: each axis is sign-fixed so its
    largest-magnitude component is positive.  Constant data gets the
    identity rotation with a warning.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / max(X.shape[0] - 1, 1)
    if not np.any(np.diag(cov) > 0):
        warnings.warn("constant data: PCA rotation is the identity", stacklevel=2)
        rot = AxisRotation(mean=mean, components=np.eye(X.shape[1]))
        return rot.apply(X), rot
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    components = eigvecs[:, order].T
    for i in range(components.shape[0]):
        j = np.argmax(np.abs(components[i]))
        if components[i, j] < 0:
            components[i] = -components[i]
    rot = AxisRotation(mean=mean, components=components)
    return rot.apply(X), rot


def pseudo_count(n_j: int, k: float) -> int:
    """Local pseudo-input budget: ``min(n_j, max(1, ceil(k sqrt(n_j))))``."""
    if n_j < 1:
        raise InvalidInputError(f"subdomain size must be >= 1, got {n_j}")
    if k <= 0:
        raise InvalidInputError(f"pseudo density must be positive, got {k}")
    lo, hi = PSEUDO_DENSITY_RANGE
    if not (lo <= k <= hi):
        warnings.warn(
            f"pseudo density k={k} outside the supported range [{lo}, {hi}]",
            stacklevel=2)
    raw = k * math.sqrt(n_j)
    if abs(raw - round(raw)) < 1e-9:
        raw = round(raw)
    return int(min(n_j, max(1, math.ceil(raw))))


def partition_report(domain: OrthopeDomain, spec: PartitionSpec,
                     membership=None) -> str:
    """Human-readable summary of a partition (counts, bounds, grid totals)."""
    lines = []
    lines.append(f"partition: {spec.n_subdomains} subdomains, axis {spec.axis}, "
                 f"{spec.width_mode}")
    lines.append("domain: " + " x ".join(
        f"[{lo:g}, {hi:g}]" for lo, hi in zip(domain.lower, domain.upper)))
    counts = None
    if membership is not None:
        membership = np.asarray(membership)
        counts = np.bincount(membership, minlength=spec.n_subdomains)
    edges = np.concatenate(([domain.lower[spec.axis]], spec.cuts,
                            [domain.upper[spec.axis]]))
    for j in range(spec.n_subdomains):
        close = "]" if j == spec.n_subdomains - 1 else ")"
        row = f"  subdomain {j}: axis {spec.axis} in [{edges[j]:g}, {edges[j + 1]:g}{close}"
        if counts is not None:
            row += f", {counts[j]} points"
        lines.append(row)
    per_face = (spec.fold_density + 1) ** (domain.d - 1)
    lines.append(f"boundaries: {spec.n_boundaries} faces, fold density "
                 f"{spec.fold_density}, {per_face} control points each, "
                 f"{spec.n_boundaries * per_face} total")
    return "\n".join(lines)
