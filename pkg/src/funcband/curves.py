"""Discretized curves on a shared grid, trapezoidal quadrature, and curve CSV I/O."""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "Grid",
    "FunctionalSeries",
    "trapezoid_weights",
    "center",
    "inner_product",
    "l2_norm",
    "sup_norm",
    "read_csv",
    "write_csv",
]


def _frozen(array, dtype=float):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def trapezoid_weights(points):
    """Trapezoidal quadrature weights for a strictly increasing grid."""
    points = np.asarray(points, dtype=float)
    half_steps = np.diff(points) / 2
    weights = np.zeros_like(points)
    weights[:-1] += half_steps
    weights[1:] += half_steps
    return weights


@dataclass(frozen=True, eq=False)
class Grid:
    """Evaluation points ``tau_1 < ... < tau_J`` in [0, 1] with trapezoidal weights.

    Parameters
    ----------
    points : array_like
        Strictly increasing grid points inside ``[0, 1]``; at least two.
    """

    points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidInputError("a grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise InvalidInputError("grid points must be strictly increasing")
        if pts[0] < 0 or pts[-1] > 1:
            raise InvalidInputError("grid points must lie in [0, 1]")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(trapezoid_weights(pts)))

    @classmethod
    def uniform(cls, J):
        """Equispaced grid of ``J`` points covering [0, 1]."""
        return cls(np.linspace(0.0, 1.0, int(J)))

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def mask(self, interval=None):
        """Boolean mask selecting grid points inside ``interval = (lo, hi)``."""
        if interval is None:
            return np.ones(len(self), dtype=bool)
        lo, hi = (float(end) for end in interval)
        if lo > hi:
            raise InvalidInputError(f"interval [{lo}, {hi}] is reversed")
        slack = 1e-12
        inside = (self.points >= lo - slack) & (self.points <= hi + slack)
        if not inside.any():
            raise InvalidInputError(f"interval [{lo}, {hi}] contains no grid points")
        return inside


@dataclass(frozen=True, eq=False)
class FunctionalSeries:
    """A time-ordered stack of ``n`` curves sampled on a common grid.

    ``values[t]`` is the curve observed at time ``t`` (0-based).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.ndim != 2:
            raise InvalidInputError("values must be an n x J matrix")
        if vals.shape[0] < 1:
            raise InvalidInputError("a series needs at least one curve")
        if vals.shape[1] != len(self.grid):
            raise InvalidInputError(f"curves have {vals.shape[1]} points but the grid has {len(self.grid)}")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("curve values must be finite")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def n(self):
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def __getitem__(self, item):
        if isinstance(item, slice):
            return FunctionalSeries(self.grid, self.values[item])
        return self.values[item]

    def mean_curve(self):
        return self.values.mean(axis=0)


def center(series):
    """Subtract the pointwise sample mean.

    Returns
    -------
    centered : FunctionalSeries
    mean_curve : ndarray of shape (J,)
    """
    if not isinstance(series, FunctionalSeries):
        raise InvalidInputError("center expects a FunctionalSeries")
    mean_curve = series.values.mean(axis=0)
    return FunctionalSeries(series.grid, series.values - mean_curve), mean_curve


def _check_on_grid(curve, grid, name="f"):
    curve = np.asarray(curve, dtype=float)
    if curve.shape[-1:] != (len(grid),):
        raise InvalidInputError(f"{name} has {curve.shape[-1] if curve.ndim else 0} points, grid has {len(grid)}")
    return curve


def inner_product(left, right, grid):
    """Quadrature inner product: the weighted sum of ``left * right`` over the grid.

    Leading axes broadcast, so stacks of curves give stacks of products.
    """
    left = _check_on_grid(left, grid, "left")
    right = _check_on_grid(right, grid, "right")
    return (left * right) @ grid.weights


def l2_norm(curve, grid):
    return np.sqrt(np.maximum(inner_product(curve, curve, grid), 0.0))


def sup_norm(curve, grid=None, interval=None):
    """Maximum absolute value over the grid, optionally restricted to an interval."""
    curve = np.asarray(curve, dtype=float)
    if interval is not None:
        if grid is None:
            raise InvalidInputError("restricting sup_norm to an interval requires the grid")
        curve = _check_on_grid(curve, grid)[..., grid.mask(interval)]
    if curve.shape[-1] == 0:
        raise InvalidInputError("sup_norm over an empty set of points")
    return np.max(np.abs(curve), axis=-1)


def write_csv(series, path, labels=None):
    """Write curves as ``tau,<tau_1>,...`` followed by one ``t,<x_1>,...`` row per curve.

    Numbers are written in shortest round-trip form, so reading back is exact.
    """
    if labels is None:
        labels = range(1, series.n + 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau"] + [repr(float(pt)) for pt in series.grid.points])
        for lab, row in zip(labels, series.values):
            writer.writerow([str(lab)] + [repr(float(val)) for val in row])


def read_csv(path):
    """Read a curve CSV written by :func:`write_csv` (or by hand in that layout)."""
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    header = rows[0]
    if header[0].strip().lower() != "tau":
        raise InvalidInputError(f"{path}: row 1, column 1: expected 'tau', got {header[0]!r}")
    points = []
    for col, cell in enumerate(header[1:], start=2):
        try:
            points.append(float(cell))
        except ValueError:
            raise InvalidInputError(f"{path}: row 1, column {col}: not a number: {cell!r}") from None
    values = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InvalidInputError(f"{path}: row {line}: expected {len(header)} columns, got {len(row)}")
        vals = []
        for col, cell in enumerate(row[1:], start=2):
            try:
                vals.append(float(cell))
            except ValueError:
                raise InvalidInputError(f"{path}: row {line}, column {col}: not a number: {cell!r}") from None
        values.append(vals)
    if not values:
        raise InvalidInputError(f"{path}: no curves after the header")
    try:
        grid = Grid(points)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{path}: row 1: {exc}") from None
    return FunctionalSeries(grid, np.array(values))
