"""Scoring of interval forecasts against realized curves.

All metrics count over grid points, so a curve observed on ``J`` points
contributes ``J`` pointwise indicators.
"""

from dataclasses import dataclass
import csv

import numpy as np

from .curves import inner_product
from .errors import InvalidInputError

__all__ = [
    "ForecastRecord",
    "coverage",
    "cpd",
    "interval_score",
    "conditional_mse",
    "ConditionalMSE",
    "REPORT_COLUMNS",
    "write_report",
    "read_report",
]

REPORT_COLUMNS = (
    "nominal",
    "coverage_pointwise",
    "cpd_pointwise",
    "coverage_uniform",
    "cpd_uniform",
    "interval_score",
)


@dataclass(frozen=True, eq=False)
class ForecastRecord:
    """A realized curve and the band issued for it ``h`` steps earlier."""

    truth: np.ndarray
    band: object
    h: int = 1

    def __post_init__(self):
        truth = np.asarray(self.truth, dtype=float)
        if truth.shape != self.band.center.shape:
            raise InvalidInputError("truth and band live on different grids")
        object.__setattr__(self, "truth", truth)


def _stack(records):
    records = list(records)
    if not records:
        raise InvalidInputError("no forecast records")
    truth = np.stack([rec.truth for rec in records])
    lower = np.stack([rec.band.lower for rec in records])
    upper = np.stack([rec.band.upper for rec in records])
    mask = np.stack([rec.band.mask for rec in records])
    return truth, lower, upper, mask


def _outside(records):
    truth, lower, upper, mask = _stack(records)
    above = (truth > upper) & mask
    below = (truth < lower) & mask
    return above, below, mask


def coverage(records):
    """Empirical ``(pointwise, uniform)`` coverage.

    ``pointwise = 1 - (#points above or below the band) / (#records * #points)``
    and ``uniform = 1 - fraction of records with any point outside``.
    Only points inside each band's interval are counted.
    """
    above, below, mask = _outside(records)
    miss = above | below
    pointwise = 1.0 - miss.sum() / mask.sum()
    uniform = 1.0 - np.mean(miss.any(axis=1))
    return float(pointwise), float(uniform)


def cpd(cov, nominal):
    """Coverage probability difference ``|coverage - nominal|``."""
    return float(abs(float(cov) - float(nominal)))


def interval_score(records, alpha):
    """Mean interval score: width plus ``2/alpha`` times the exceedances, averaged over points."""
    alpha = float(alpha)
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    truth, lower, upper, mask = _stack(records)
    pen = 2.0 / alpha
    with np.errstate(invalid="ignore"):
        score = (upper - lower) + pen * np.maximum(truth - upper, 0) + pen * np.maximum(lower - truth, 0)
    return float(score[mask].mean())


@dataclass(frozen=True, eq=False)
class ConditionalMSE:
    """Pointwise bootstrap mean squared prediction error and its integrated root."""

    curve: np.ndarray
    rmse: float


def conditional_mse(ensemble):
    """``mean_b error_b(tau)^2`` and ``rmse = sqrt(int mse(tau) dtau)``."""
    errors = np.asarray(ensemble.errors, dtype=float)
    if errors.ndim != 2 or errors.shape[0] == 0:
        raise InvalidInputError("ensemble has no replicates")
    curve = np.mean(errors**2, axis=0)
    rmse = float(np.sqrt(inner_product(curve, np.ones_like(curve), ensemble.grid)))
    return ConditionalMSE(curve, rmse)


def write_report(rows, path):
    """Write study rows (dicts) with the required columns first, extras after in first-seen order."""
    rows = list(rows)
    extras = []
    for row in rows:
        for key in row:
            if key not in REPORT_COLUMNS and key not in extras:
                extras.append(key)
    columns = list(REPORT_COLUMNS) + extras
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(col, "")) for col in columns])


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def read_report(path):
    """Read a report CSV into a list of dicts (numeric cells parsed as float)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames[:len(REPORT_COLUMNS)]) != list(REPORT_COLUMNS):
            raise InvalidInputError(f"{path}: report must start with columns {', '.join(REPORT_COLUMNS)}")
        out = []
        for row in reader:
            parsed = {}
            for key, cell in row.items():
                try:
                    parsed[key] = float(cell)
                except (TypeError, ValueError):
                    parsed[key] = cell
            out.append(parsed)
    return out
